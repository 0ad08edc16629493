"""Textbook 2x2 games used as fixtures, CLI samples and sanity checks."""

from __future__ import annotations

import numpy as np

from .game import NormalFormGame


def _bimatrix(row, col, actions) -> NormalFormGame:
    return NormalFormGame.from_tensors(
        [np.array(row, dtype=float), np.array(col, dtype=float)],
        player_names=["row", "col"],
        action_labels=[actions, actions],
    )


def prisoners_dilemma() -> NormalFormGame:
    row = [[3, 0], [5, 1]]
    return _bimatrix(row, np.array(row).T, ["C", "D"])


def matching_pennies() -> NormalFormGame:
    row = [[1, -1], [-1, 1]]
    return _bimatrix(row, -np.array(row), ["H", "T"])


def chicken() -> NormalFormGame:
    row = [[6, 2], [7, 0]]
    return _bimatrix(row, np.array(row).T, ["C", "D"])


def coordination() -> NormalFormGame:
    row = [[2, 0], [0, 1]]
    return _bimatrix(row, row, ["A", "B"])


CLASSIC_GAMES = {
    "prisoners_dilemma": prisoners_dilemma,
    "matching_pennies": matching_pennies,
    "chicken": chicken,
    "coordination": coordination,
}
