"""Problem configs, D-N sample files and reports.

Configs and reports are JSON.  A config looks like::

    {
      "lattice": "square", "size": [5, 4], "J": 2,
      "V0": [0.0], "C0": 0.0,
      "edges": [{"between": [[2, 3], [3, 3]], "coefficients": [0.5, 0.3, -0.2]}],
      "couplings": [{"vertex": [3, 2], "value": 1.3}],
      "scan": {"n_points": 400, "lam_min": 0.5},
      "tolerances": {"potential": 1e-4, "coupling": 1e-6},
      "strategy": "pooled", "seed": 0
    }

Vertices are given by their labels: ``[i, j]`` on the square lattice and
``[n1, n2, sublattice]`` on the hex lattice.

A D-N sample file has ``#``-prefixed header lines (format tag, domain
descriptor, boundary labels in matrix order) followed by one CSV record per
energy: ``lam`` and the matrix in row-major order, each number written with
17 significant digits.  An energy the forward model refused is recorded as
``lam,rejected:pole`` or ``lam,rejected:singular`` so a replay fails the same
way.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .lattice import DomainError, LatticeDomain, build_hex_parallelogram, build_square_domain
from .stripping import ReconstructionReport, ScanConfig
from .sturm import SymmetricPotential
from .vertex_op import REJECTIONS, CouplingField, EdgeField

SAMPLE_TAG = "# qgraph-dtn-samples 1"


class ConfigError(ValueError):
    """Invalid problem configuration or input file."""


def fmt(x: float) -> str:
    return "%.17g" % x


# ---------------------------------------------------------------------------
# configs


@dataclass
class ProblemConfig:
    lattice: str
    size: tuple[int, ...]
    J: int = 2
    V0: tuple[float, ...] = (0.0,)
    C0: float = 0.0
    edges: list[dict] = field(default_factory=list)
    couplings: list[dict] = field(default_factory=list)
    scan: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=lambda: {"potential": 1e-4, "coupling": 1e-6})
    strategy: str = "pooled"
    seed: int = 0

    @classmethod
    def from_dict(cls, raw: dict) -> "ProblemConfig":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(raw) - known
        if extra:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(extra))}")
        if "lattice" not in raw or "size" not in raw:
            raise ConfigError("config needs 'lattice' and 'size'")
        cfg = cls(**{**raw, "size": tuple(raw["size"]), "V0": tuple(raw.get("V0", (0.0,)))})
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path: str | Path) -> "ProblemConfig":
        try:
            raw = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(raw)

    @classmethod
    def unperturbed(cls, lattice: str) -> "ProblemConfig":
        return cls.from_dict({"lattice": lattice, "size": [4, 4] if lattice == "square" else [2]})

    def to_dict(self) -> dict:
        return {
            "lattice": self.lattice, "size": list(self.size), "J": self.J, "V0": list(self.V0),
            "C0": self.C0, "edges": self.edges, "couplings": self.couplings, "scan": self.scan,
            "tolerances": self.tolerances, "strategy": self.strategy, "seed": self.seed,
        }

    # -- validation and construction -------------------------------------
    def domain(self) -> LatticeDomain:
        try:
            if self.lattice == "square":
                if len(self.size) != 2:
                    raise ConfigError("square size is [m, n]")
                return build_square_domain(*map(int, self.size))
            if self.lattice == "hex":
                if len(self.size) != 1:
                    raise ConfigError("hex size is [N]")
                return build_hex_parallelogram(int(self.size[0]))
        except DomainError as exc:
            raise ConfigError(str(exc)) from exc
        raise ConfigError(f"unknown lattice {self.lattice!r}")

    def _potential(self, coeffs) -> SymmetricPotential:
        try:
            pot = SymmetricPotential(tuple(float(c) for c in coeffs))
            return pot.padded(self.J)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad coefficients {coeffs!r}: {exc}") from exc

    def _vertex(self, dom: LatticeDomain, label) -> int:
        try:
            return dom.vertex(tuple(int(x) for x in label))
        except (KeyError, TypeError, ValueError):
            raise ConfigError(f"no vertex {label!r} in {dom.descriptor()}") from None

    def validate(self) -> None:
        if not isinstance(self.J, int) or self.J < 0:
            raise ConfigError("J must be a nonnegative integer")
        if self.strategy not in ("pooled", "lines"):
            raise ConfigError(f"unknown strategy {self.strategy!r}")
        if not math.isfinite(float(self.C0)):
            raise ConfigError("C0 must be finite")
        unknown_scan = set(self.scan) - {"n_points", "lam_min", "lam_max", "exclusion", "n_avg", "max_refine"}
        if unknown_scan:
            raise ConfigError(f"unknown scan keys: {', '.join(sorted(unknown_scan))}")
        for key in ("potential", "coupling"):
            if key not in self.tolerances or not float(self.tolerances[key]) > 0:
                raise ConfigError(f"tolerances.{key} must be positive")
        self.fields()

    def fields(self) -> tuple[LatticeDomain, EdgeField, CouplingField]:
        dom = self.domain()
        base = self._potential(self.V0)
        adjacent = dom.boundary_adjacent_edges()
        over = {}
        for item in self.edges:
            try:
                a, b = item["between"]
                coeffs = item["coefficients"]
            except (KeyError, TypeError, ValueError):
                raise ConfigError(f"edge entry needs 'between' and 'coefficients': {item!r}") from None
            va, vb = self._vertex(dom, a), self._vertex(dom, b)
            try:
                e = dom.edge_between(va, vb)
            except DomainError:
                raise ConfigError(f"no edge between {a} and {b}") from None
            if e in adjacent:
                raise ConfigError(f"edge {a}-{b} touches the boundary; boundary-adjacent edges must stay at V0")
            if e in over:
                raise ConfigError(f"edge {a}-{b} perturbed twice")
            over[e] = self._potential(coeffs)
        cover = {}
        for item in self.couplings:
            try:
                v = self._vertex(dom, item["vertex"])
                value = float(item["value"])
            except (KeyError, TypeError, ValueError):
                raise ConfigError(f"coupling entry needs 'vertex' and 'value': {item!r}") from None
            if dom.is_boundary(v):
                raise ConfigError(f"coupling at boundary vertex {item['vertex']}")
            if not math.isfinite(value):
                raise ConfigError("coupling values must be finite")
            cover[v] = value
        return dom, EdgeField(base, over), CouplingField(float(self.C0), cover)

    def scan_config(self) -> ScanConfig:
        return ScanConfig(J=self.J, **self.scan)


# ---------------------------------------------------------------------------
# D-N samples


def _label_str(label) -> str:
    return ":".join(str(x) for x in label)


def write_samples(path: str | Path, domain: LatticeDomain, samples: dict[float, np.ndarray],
                  rejected: dict[float, str] | None = None) -> None:
    """Write a sample file; energies are sorted, output is byte-deterministic."""
    bd = domain.boundary
    rejected = rejected or {}
    if set(rejected) & set(samples):
        raise ValueError("an energy cannot be both sampled and rejected")
    if set(rejected.values()) - set(REJECTIONS):
        raise ValueError(f"rejection kinds are {sorted(REJECTIONS)}")
    lines = [
        SAMPLE_TAG,
        f"# domain {domain.descriptor()}",
        "# boundary " + " ".join(_label_str(domain.label(b)) for b in bd),
    ]
    for lam in sorted(set(samples) | set(rejected)):
        if lam in rejected:
            lines.append(f"{fmt(lam)},rejected:{rejected[lam]}")
            continue
        mat = np.asarray(samples[lam], dtype=float)
        if mat.shape != (len(bd), len(bd)):
            raise ValueError(f"sample at {lam!r} has shape {mat.shape}")
        lines.append(",".join([fmt(lam)] + [fmt(x) for x in mat.ravel()]))
    Path(path).write_text("\n".join(lines) + "\n")


def read_sample_set(path: str | Path, domain: LatticeDomain) -> tuple[dict[float, np.ndarray], dict[float, str]]:
    """Matrices by energy and the rejected energies with their kind."""
    try:
        text = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read samples {path}: {exc}") from exc
    if not text or text[0] != SAMPLE_TAG:
        raise ConfigError(f"{path} is not a D-N sample file")
    header = {}
    body = []
    for line in text[1:]:
        if line.startswith("# "):
            key, _, rest = line[2:].partition(" ")
            header[key] = rest
        elif line.strip():
            body.append(line)
    if header.get("domain") != domain.descriptor():
        raise ConfigError(f"sample file is for {header.get('domain')}, config builds {domain.descriptor()}")
    expect = " ".join(_label_str(domain.label(b)) for b in domain.boundary)
    if header.get("boundary") != expect:
        raise ConfigError("sample file boundary order does not match the domain")
    nb = len(domain.boundary)
    out: dict[float, np.ndarray] = {}
    rejected: dict[float, str] = {}
    prev = -math.inf
    for i, line in enumerate(body):
        parts = line.split(",")
        try:
            lam = float(parts[0])
        except ValueError:
            raise ConfigError(f"record {i} does not start with an energy") from None
        if not lam > prev:
            raise ConfigError("sample energies must be strictly increasing")
        prev = lam
        if len(parts) == 2 and parts[1].startswith("rejected:"):
            kind = parts[1].partition(":")[2]
            if kind not in REJECTIONS:
                raise ConfigError(f"record {i}: unknown rejection {kind!r}")
            rejected[lam] = kind
            continue
        if len(parts) != 1 + nb * nb:
            raise ConfigError(f"record {i} has {len(parts) - 1} entries, expected {nb * nb}")
        try:
            out[lam] = np.array([float(x) for x in parts[1:]]).reshape(nb, nb)
        except ValueError:
            raise ConfigError(f"record {i} has a non-numeric entry") from None
    return out, rejected


def read_samples(path: str | Path, domain: LatticeDomain) -> dict[float, np.ndarray]:
    return read_sample_set(path, domain)[0]


def read_lambdas(path: str | Path) -> list[float]:
    try:
        return [float(x) for x in Path(path).read_text().split()]
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read energies from {path}: {exc}") from exc


def write_lambdas(path: str | Path, lams) -> None:
    Path(path).write_text("".join(fmt(x) + "\n" for x in lams))


# ---------------------------------------------------------------------------
# reports


def report_dict(report: ReconstructionReport) -> dict:
    """JSON-ready report; holds no timings so equal runs give equal files."""
    dom = report.domain

    def edge_labels(e):
        ed = dom.edges[e]
        return [list(dom.label(ed.tail)), list(dom.label(ed.head))]

    return {
        "domain": dom.descriptor(),
        "edges": [
            {
                "between": edge_labels(e),
                "coefficients": list(r.potential.coefficients),
                "eigenvalues": list(r.eigenvalues),
                "spectrum_residual": r.spectrum_residual,
                "driver": r.driver,
                "rule": r.rule,
            }
            for e, r in report.edge_records.items()
        ],
        "couplings": [
            {
                "vertex": list(dom.label(v)),
                "value": r.value,
                "spread": r.spread,
                "lam_points": list(r.lam_points),
                "driver": r.driver,
                "rule": r.rule,
            }
            for v, r in report.coupling_records.items()
        ],
        "n_lam": len(report.lam_points),
        "flags": list(report.flags),
    }


def compare(report: ReconstructionReport, edges: EdgeField, couplings: CouplingField, J: int) -> dict:
    """Largest coefficient and coupling errors against the true fields."""
    dom = report.domain
    e_err, worst_e = max(
        (float(np.max(np.abs(np.subtract(report.edges[e].padded(J).coefficients, edges[e].padded(J).coefficients)))), e)
        for e in range(len(dom.edges))
    )
    c_err, worst_c = max((abs(report.couplings[v] - couplings[v]), v) for v in dom.interior)
    return {
        "potential_error": e_err,
        "worst_edge": [list(dom.label(dom.edges[worst_e].tail)), list(dom.label(dom.edges[worst_e].head))],
        "coupling_error": c_err,
        "worst_vertex": list(dom.label(worst_c)),
    }


def dump_json(path: str | Path | None, data: dict) -> str:
    text = json.dumps(data, indent=1, sort_keys=True) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text
