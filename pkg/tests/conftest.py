"""Shared builders for the test suite."""

from __future__ import annotations

import numpy as np
import pandas as pd
import pytest

from coincast.panel_io import Panel, QuarterlyTarget, RawPanel


def make_panel(x: np.ndarray, start: str = "1959-01") -> Panel:
    """Wrap a raw n x T array as a standardized Panel."""
    x = np.asarray(x, dtype=float)
    means = x.mean(axis=1)
    stds = x.std(axis=1)
    stds[stds == 0.0] = 1.0
    z = (x - means[:, None]) / stds[:, None]
    dates = pd.period_range(start, periods=x.shape[1], freq="M")
    return Panel(z, dates, means, stds, [f"s{i}" for i in range(x.shape[0])])


def make_raw_panel(values: np.ndarray, tcodes: list[int], start: str = "1959-01") -> RawPanel:
    values = np.asarray(values, dtype=float)
    dates = pd.period_range(start, periods=values.shape[0], freq="M")
    ids = [f"s{i}" for i in range(values.shape[1])]
    return RawPanel(ids, tcodes, values, dates)


def make_quarterly(g: np.ndarray, a: np.ndarray | None = None, offset: int = 2) -> QuarterlyTarget:
    """Quarterly growth observed at months offset, offset+3, ..."""
    g = np.asarray(g, dtype=float)
    if a is None:
        a = np.full_like(g, np.nan)
        a[4:] = g[4:] + g[3:-1] + g[2:-2] + g[1:-3]
    months = offset + 3 * np.arange(g.size)
    quarters = pd.period_range("1959Q1", periods=g.size, freq="Q")
    return QuarterlyTarget(g, np.asarray(a, dtype=float), months, quarters)


def model_consistent_pair(rng: np.random.Generator, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Random (gamma0_x, gamma0_phi) with gamma0_x - gamma0_phi positive semidefinite.

    Mirrors the model structure gamma0_x = gamma0_phi + psi-part + idio-part,
    all three positive semidefinite, which is what bounds the generalized
    eigenvalues by one.
    """
    r_phi = rng.integers(1, max(2, n // 3) + 1)
    b = rng.standard_normal((n, r_phi))
    gamma_phi = b @ b.T
    c = rng.standard_normal((n, rng.integers(1, n // 2 + 1)))
    gamma_psi = c @ c.T
    d = rng.standard_normal((n, n))
    gamma_xi = d @ d.T / n + 0.1 * np.eye(n)
    return gamma_phi + gamma_psi + gamma_xi, gamma_phi


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20230508)
