"""Level and power tables for the bootstrap goodness-of-fit test."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

from .boot import BootstrapConfig, rejection_frequency
from .scenarios import DistSpec, alternative_scenario, null_scenario

CSV_COLUMNS = ("J", "n", "m_rule", "freq", "K", "B", "alpha", "seed")


@dataclass
class ExperimentTable:
    """Rejection frequencies keyed by ``(J, n)`` and then by the exponent of m."""

    cells: dict = field(default_factory=dict)
    K: int = 0
    B: int = 0
    alpha: float = 0.05
    seed: int = 0

    def set(self, J, n, beta, freq):
        if not 0.0 <= freq <= 1.0:
            raise ValueError("frequencies must lie in [0, 1]")
        self.cells.setdefault((int(J), int(n)), {})[float(beta)] = float(freq)

    def get(self, J, n, beta):
        return self.cells[(int(J), int(n))][float(beta)]

    def rows(self):
        for (J, n) in sorted(self.cells):
            for beta in sorted(self.cells[(J, n)]):
                yield J, n, beta, self.cells[(J, n)][beta]

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for J, n, beta, freq in self.rows():
            w.writerow([J, n, repr(beta), repr(freq), self.K, self.B, repr(float(self.alpha)), self.seed])
        return buf.getvalue()

    def write_csv(self, path):
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.to_csv())

    @classmethod
    def from_csv(cls, text):
        reader = csv.DictReader(io.StringIO(text))
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ValueError(f"expected columns {','.join(CSV_COLUMNS)}")
        table = None
        for row in reader:
            meta = (int(row["K"]), int(row["B"]), float(row["alpha"]), int(row["seed"]))
            if table is None:
                table = cls(K=meta[0], B=meta[1], alpha=meta[2], seed=meta[3])
            elif meta != (table.K, table.B, table.alpha, table.seed):
                raise ValueError("inconsistent metadata across table rows")
            table.set(int(row["J"]), int(row["n"]), float(row["m_rule"]), float(row["freq"]))
        return table or cls()

    @classmethod
    def read_csv(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_csv(fh.read())


def _run(grid, scenario_for, K, B, alpha, seed, threads, family):
    grid = [(int(J), int(n), float(beta)) for J, n, beta in grid]
    if not grid:
        raise ValueError("empty experiment grid")
    table = ExperimentTable(K=int(K), B=int(B), alpha=float(alpha), seed=int(seed))
    for J, n, beta in grid:
        scenario = scenario_for(J, n)
        cfg = BootstrapConfig(B=int(B), m_exponent=beta, alpha=float(alpha))
        # datasets are keyed by (J, n) only, so all columns of a row share them
        freq = rejection_frequency(
            scenario, K, cfg, test="gof", family=family, seed=seed, key=(J, n), threads=threads
        )
        table.set(J, n, beta, freq)
    return table


def run_level_experiment(grid, K=300, B=500, alpha=0.05, seed=0, threads=1, family="location-scale"):
    """Rejection frequencies of the test on data where the model holds.

    ``grid`` is a list of ``(J, n, beta)`` with ``m = ceil(n ** beta)``.
    """
    return _run(grid, lambda J, n: null_scenario(J, n, seed, family), K, B, alpha, seed, threads, family)


def run_power_experiment(grid, gamma, K=300, B=500, alpha=0.05, seed=0, threads=1,
                         family="location-scale"):
    """Rejection frequencies when the last population is drawn from ``gamma``."""
    gamma = DistSpec.parse(gamma)
    return _run(
        grid, lambda J, n: alternative_scenario(J, n, gamma, seed, family), K, B, alpha, seed, threads, family
    )
