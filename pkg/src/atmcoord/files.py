"""JSON and CSV file formats.

Game file::

    {"players": ["row", "col"],
     "actions": [["C", "D"], ["C", "D"]],
     "utilities": [[3, 0, 5, 1], [3, 5, 0, 1]]}

Utilities are flat per player in row-major joint order (player 0 most
significant). Distribution file: ``{"z": [...]}`` in the same order.
Scenario file (congestion)::

    {"sectors": [{"id": "S0", "capacity": 1}],
     "horizon": 4,
     "flights": [{"id": "F0", "owner": "S0", "route": [["S0", 1]], "shifts": [0, 1]}]}

Steering problem: ``{"game": <game>, "u_max", "delta", "horizon", "x0",
"target": [[...]], "safe": [[...]] (optional, default all profiles),
"order": [...] (optional)}``. Runway scenario: ``{"airlines", "slots",
"preferred", "weights", "seed"}``.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .congestion import CongestionInstance, Flight, ScheduleProfile, Sector
from .errors import GameInputError
from .game import JointDistribution, NormalFormGame
from .scenarios import RunwayScenario
from .steering import SteeringProblem

DIST_LOAD_TOL = 1e-6


def _reject_constant(name: str):
    raise GameInputError(f"non-finite number {name} in JSON input")


def loads(text: str) -> Any:
    try:
        return json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise GameInputError(f"invalid JSON: {exc}") from None


def read_json(path: str | Path) -> Any:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise GameInputError(f"cannot read {path}: {exc}") from None
    return loads(text)


def dumps(obj: Any) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def write_json(path: str | Path, obj: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj), encoding="utf-8")
    return path


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(csv_text(header, rows), encoding="utf-8")
    return path


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _field(doc: dict, key: str, where: str):
    if not isinstance(doc, dict) or key not in doc:
        raise GameInputError(f"{where}: missing field {key!r}")
    return doc[key]


def game_to_dict(game: NormalFormGame) -> dict:
    return {
        "players": list(game.player_names),
        "actions": [list(a) for a in game.action_labels],
        "utilities": [[float(v) for v in row] for row in game.utilities],
    }


def game_from_dict(doc: dict) -> NormalFormGame:
    players = _field(doc, "players", "game")
    actions = _field(doc, "actions", "game")
    utilities = _field(doc, "utilities", "game")
    if not isinstance(utilities, list) or any(not isinstance(r, list) for r in utilities):
        raise GameInputError("game: utilities must be a list of flat lists")
    try:
        util = np.array(utilities, dtype=float)
    except (TypeError, ValueError):
        raise GameInputError("game: utilities must be rectangular numeric lists") from None
    if util.ndim != 2:
        raise GameInputError("game: utilities must be one flat list per player")
    return NormalFormGame(tuple(players), tuple(tuple(a) for a in actions), util)


def load_game(path: str | Path) -> NormalFormGame:
    return game_from_dict(read_json(path))


def save_game(path: str | Path, game: NormalFormGame) -> Path:
    return write_json(path, game_to_dict(game))


def dist_to_dict(z: JointDistribution) -> dict:
    return {"z": [float(p) for p in z.probs]}


def dist_from_dict(doc: dict, game: NormalFormGame | None = None) -> JointDistribution:
    z = np.array(_field(doc, "z", "distribution"), dtype=float).reshape(-1)
    if game is not None and z.size != game.n_joint:
        raise GameInputError(
            f"distribution has {z.size} entries, game has {game.n_joint} joint actions"
        )
    if np.any(z < -DIST_LOAD_TOL) or abs(z.sum() - 1.0) > DIST_LOAD_TOL:
        raise GameInputError("distribution is not on the simplex (tolerance 1e-6)")
    z = np.clip(z, 0.0, None)
    return JointDistribution(z / z.sum())


def load_distribution(path: str | Path, game: NormalFormGame | None = None) -> JointDistribution:
    return dist_from_dict(read_json(path), game)


def save_distribution(path: str | Path, z: JointDistribution) -> Path:
    return write_json(path, dist_to_dict(z))


def scenario_to_dict(inst: CongestionInstance) -> dict:
    return {
        "sectors": [{"id": s.id, "capacity": s.capacity} for s in inst.sectors],
        "horizon": inst.horizon,
        "flights": [
            {
                "id": f.id,
                "owner": f.owner,
                "route": [[s, b] for s, b in f.route],
                "shifts": list(f.shifts),
            }
            for f in inst.flights
        ],
    }


def scenario_from_dict(doc: dict) -> CongestionInstance:
    try:
        sectors = tuple(
            Sector(str(_field(s, "id", "sector")), int(_field(s, "capacity", "sector")))
            for s in _field(doc, "sectors", "scenario")
        )
        flights = tuple(
            Flight(
                str(_field(f, "id", "flight")),
                str(_field(f, "owner", "flight")),
                tuple((str(s), int(b)) for s, b in _field(f, "route", "flight")),
                tuple(int(v) for v in _field(f, "shifts", "flight")),
            )
            for f in _field(doc, "flights", "scenario")
        )
        horizon = int(_field(doc, "horizon", "scenario"))
    except (TypeError, ValueError) as exc:
        raise GameInputError(f"scenario: malformed entry ({exc})") from None
    return CongestionInstance(sectors, horizon, flights)


def load_scenario(path: str | Path) -> CongestionInstance:
    return scenario_from_dict(read_json(path))


def save_scenario(path: str | Path, inst: CongestionInstance) -> Path:
    return write_json(path, scenario_to_dict(inst))


def profile_to_dict(x: ScheduleProfile, inst: CongestionInstance) -> dict:
    return {"shifts": x.as_mapping(inst)}


def runway_to_dict(sc: RunwayScenario) -> dict:
    return {
        "airlines": sc.n_airlines,
        "slots": sc.n_slots,
        "preferred": list(sc.preferred),
        "weights": list(sc.weights),
        "seed": sc.seed,
    }


def runway_from_dict(doc: dict) -> RunwayScenario:
    return RunwayScenario(
        int(_field(doc, "airlines", "runway")),
        int(_field(doc, "slots", "runway")),
        tuple(_field(doc, "preferred", "runway")),
        tuple(_field(doc, "weights", "runway")),
        doc.get("seed"),
    )


def problem_to_dict(prob: SteeringProblem, x0: Sequence[int]) -> dict:
    return {
        "game": game_to_dict(prob.game),
        "u_max": prob.u_max,
        "delta": prob.delta,
        "horizon": prob.horizon,
        "x0": list(x0),
        "safe": [list(p) for p in prob.safe],
        "target": [list(p) for p in prob.target],
        "order": list(prob.order),
    }


def problem_from_dict(doc: dict) -> tuple[SteeringProblem, tuple[int, ...]]:
    game = game_from_dict(_field(doc, "game", "problem"))
    safe = doc.get("safe")
    if safe is None:
        safe = list(game.profiles())
    try:
        prob = SteeringProblem(
            game=game,
            u_max=float(_field(doc, "u_max", "problem")),
            delta=float(_field(doc, "delta", "problem")),
            safe=tuple(tuple(p) for p in safe),
            target=tuple(tuple(p) for p in _field(doc, "target", "problem")),
            horizon=int(_field(doc, "horizon", "problem")),
            order=tuple(doc["order"]) if doc.get("order") is not None else None,
        )
        x0 = tuple(int(a) for a in _field(doc, "x0", "problem"))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, GameInputError):
            raise
        raise GameInputError(f"problem: malformed entry ({exc})") from None
    return prob, x0


def load_problem(path: str | Path) -> tuple[SteeringProblem, tuple[int, ...]]:
    return problem_from_dict(read_json(path))
