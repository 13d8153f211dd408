"""Two-sample tests and the real-vs-synthetic similarity report.

All sums go through ``math.fsum`` so every test is exactly symmetric in its
two arguments.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import FeatureDataset
from .errors import ConfigurationError, ReportError
from .seeding import derive_seed
from .special import f_sf, kolmogorov_sf, student_t_sf2

ALPHA_LEVEL = 0.05
TESTS = ("t", "levene", "ks")


def _vec(a):
    return [float(v) for v in np.asarray(a, dtype=np.float64).ravel()]


def _mean(v):
    return math.fsum(v) / len(v)


def _var(v, m):
    return math.fsum((x - m) ** 2 for x in v) / (len(v) - 1)


def welch_t(a, b) -> tuple[float, float, float]:
    """Welch statistic, Welch-Satterthwaite dof and two-sided p-value."""
    a, b = _vec(a), _vec(b)
    if len(a) < 2 or len(b) < 2:
        raise ConfigurationError("t-test needs at least 2 points per sample")
    ma, mb = _mean(a), _mean(b)
    va, vb = _var(a, ma) / len(a), _var(b, mb) / len(b)
    se2 = va + vb
    if se2 == 0:
        return (0.0, math.nan, 1.0) if ma == mb else (math.copysign(math.inf, ma - mb), math.nan, 0.0)
    t = (ma - mb) / math.sqrt(se2)
    df = se2 * se2 / (va * va / (len(a) - 1) + vb * vb / (len(b) - 1))
    return t, df, min(1.0, max(0.0, student_t_sf2(t, df)))


def t_test(a, b) -> float:
    """Two-sided Welch (unequal-variance) t-test p-value.

    Two constant samples give 1.0 when equal and 0.0 otherwise.
    """
    return welch_t(a, b)[2]


def levene_w(a, b) -> tuple[float, float]:
    """Mean-centred Levene statistic W and its F(1, N-2) p-value."""
    a, b = _vec(a), _vec(b)
    if len(a) < 2 or len(b) < 2:
        raise ConfigurationError("Levene's test needs at least 2 points per group")
    ca, cb = _mean(a), _mean(b)
    za = [abs(x - ca) for x in a]
    zb = [abs(x - cb) for x in b]
    n = len(za) + len(zb)
    ma, mb = _mean(za), _mean(zb)
    grand = math.fsum(za + zb) / n
    between = math.fsum([len(za) * (ma - grand) ** 2, len(zb) * (mb - grand) ** 2])
    within = math.fsum([math.fsum((z - ma) ** 2 for z in za), math.fsum((z - mb) ** 2 for z in zb)])
    if within == 0:
        return (0.0, 1.0) if between == 0 else (math.inf, 0.0)
    w = (n - 2) * between / within
    return w, min(1.0, max(0.0, f_sf(w, 1, n - 2)))


def levene_test(a, b) -> float:
    return levene_w(a, b)[1]


def ks_statistic(a, b) -> float:
    """Two-sample Kolmogorov-Smirnov D = sup |ECDF_a - ECDF_b|."""
    a, b = np.sort(_vec(a)), np.sort(_vec(b))
    na, nb = len(a), len(b)
    if na == 0 or nb == 0:
        raise ConfigurationError("KS test needs at least 1 point per sample")
    grid = np.concatenate([a, b])
    ia = np.searchsorted(a, grid, side="right")
    ib = np.searchsorted(b, grid, side="right")
    # integer numerators keep D exact and symmetric
    return int(np.abs(ia * nb - ib * na).max()) / (na * nb)


def ks_test(a, b) -> float:
    """Asymptotic two-sided KS p-value with effective size na*nb/(na+nb)."""
    na, nb = np.size(a), np.size(b)
    d = ks_statistic(a, b)
    return kolmogorov_sf(math.sqrt(na * nb / (na + nb)) * d)


@dataclass(frozen=True)
class TestRow:
    feature: str
    label: str
    p_t: float
    p_levene: float
    p_ks: float
    view: str | None = None

    __test__ = False  # not a pytest class

    def p(self, test):
        return {"t": self.p_t, "levene": self.p_levene, "ks": self.p_ks}[test]


@dataclass
class TestReport:
    __test__ = False  # not a pytest class

    rows: list[TestRow]
    sample_size_per_side: int
    meta: dict = field(default_factory=dict)

    def pass_fractions(self, level=ALPHA_LEVEL) -> dict[str, float]:
        if not self.rows:
            return {t: math.nan for t in TESTS}
        return {t: sum(r.p(t) > level for r in self.rows) / len(self.rows) for t in TESTS}

    @property
    def pass_fraction(self) -> float:
        """Fraction of rows passing all three tests at p > 0.05."""
        if not self.rows:
            return math.nan
        return sum(all(r.p(t) > ALPHA_LEVEL for t in TESTS) for r in self.rows) / len(self.rows)

    def to_dict(self):
        return {
            "sample_size_per_side": self.sample_size_per_side,
            "pass_fraction": self.pass_fraction,
            "pass_fractions": self.pass_fractions(),
            "meta": self.meta,
            "rows": [r.__dict__ for r in self.rows],
        }

    def write(self, path):
        path = Path(path)
        if path.suffix == ".json":
            path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True))
            return path
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["view", "feature", "class", "p_t", "p_levene", "p_ks"])
            for r in self.rows:
                w.writerow([r.view or "", r.feature, r.label, repr(r.p_t), repr(r.p_levene), repr(r.p_ks)])
        return path

    def table(self) -> str:
        """Rows = (view, feature); columns = test x class."""
        labels = list(dict.fromkeys(r.label for r in self.rows))
        keyed = {(r.view, r.feature, r.label): r for r in self.rows}
        order = list(dict.fromkeys((r.view, r.feature) for r in self.rows))
        head = ["view", "feature"] + [f"{t}:{lab}" for t in TESTS for lab in labels]
        lines = ["  ".join(f"{h:>12}" for h in head)]
        for view, feat in order:
            cells = [view or "-", feat]
            for t in TESTS:
                for lab in labels:
                    r = keyed.get((view, feat, lab))
                    cells.append("-" if r is None else f"{r.p(t):.2f}")
            lines.append("  ".join(f"{c:>12}" for c in cells))
        fr = self.pass_fractions()
        lines.append(
            "pass fraction (p > 0.05): "
            + ", ".join(f"{t}={fr[t]:.3f}" for t in TESTS)
            + f", all three={self.pass_fraction:.3f}"
        )
        return "\n".join(lines) + "\n"


def similarity_report(real: FeatureDataset, synth, n_per_side: int = 20,
                      seed: int = 0, view: str | None = None) -> TestReport:
    """Per (feature, class) t / Levene / KS p-values between real and synthetic.

    ``synth`` is a ``SyntheticBatch`` or a ``FeatureDataset`` over the same
    features and label space.  For each class, ``n_per_side`` rows are drawn
    without replacement from each side once and reused across all features.
    """
    if isinstance(synth, FeatureDataset):
        synth_X, synth_y = synth.X, synth.y
    else:
        synth_X, synth_y = synth.points, synth.labels
    synth_X = np.asarray(synth_X, dtype=np.float64)
    synth_y = np.asarray(synth_y)
    rows = []
    for c, name in enumerate(real.label_names):
        r_idx = np.flatnonzero(real.y == c)
        s_idx = np.flatnonzero(synth_y == c)
        for side, idx in (("real", r_idx), ("synthetic", s_idx)):
            if len(idx) < n_per_side:
                raise ReportError(
                    f"class {name!r} has {len(idx)} {side} samples; n_per_side={n_per_side} required"
                )
        rng = np.random.default_rng(derive_seed(seed, "similarity", c))
        r_pick = real.X[rng.choice(r_idx, n_per_side, replace=False)]
        s_pick = synth_X[rng.choice(s_idx, n_per_side, replace=False)]
        for j, feat in enumerate(real.feature_names):
            a, b = r_pick[:, j], s_pick[:, j]
            rows.append(TestRow(feat, name, t_test(a, b), levene_test(a, b), ks_test(a, b), view))
    # Table layout: feature-major, class-minor
    rows.sort(key=lambda r: (real.feature_names.index(r.feature), real.label_names.index(r.label)))
    meta = {"t_test": "Welch two-sided", "levene": "mean-centred", "ks": "asymptotic two-sided",
            "seed": seed}
    return TestReport(rows, n_per_side, meta)
