"""Synthetic mass-spectrometry benchmark instances.

A dictionary column is the sampled isotopic pattern of a species at one
monoisotopic mass: Gaussian peaks at m0 + k/charge whose relative heights
follow a Poisson envelope with mean proportional to m0 (about 0.5 extra
neutrons at 1000 Da, giving 3-6 visible isotopes above the relative-weight
cutoff). Columns are normalized to unit maximum. Ground truths are
nonnegative spikes with uniform amplitudes on a uniformly drawn support;
observations add white Gaussian noise scaled as a percentage of the clean
signal's maximum.

Instances serialize to a self-describing text format holding the dense
dictionary and all vectors, so a run can be replayed byte-identically even
across builds of the generator.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields

import numpy as np

__all__ = [
    "DictionarySpec",
    "GroundTruth",
    "Instance",
    "build_dictionary",
    "sample_ground_truth",
    "synthesize_observation",
    "make_instance",
    "preset_spec",
    "preset_truth_params",
    "save_instance",
    "load_instance",
    "DATASET_SPARSITY",
]


@dataclass(frozen=True)
class DictionarySpec:
    """Geometry and envelope model of one dictionary.

    n_samples mass-axis points span [mass_min, mass_max] Da; n_atoms
    monoisotopic masses span the same range. peak_width is the Gaussian
    standard deviation in Da and must be at least the grid step. Isotope k
    sits at m0 + k/charge with weight pmf(k; lambda = envelope_mean_per_da
    * m0); weights below envelope_cutoff relative to the largest are
    dropped, and each peak is rendered only within peak_support_sigmas
    standard deviations so well-separated columns have disjoint support.
    """

    n_atoms: int = 1000
    n_samples: int = 1000
    mass_min: float = 1000.0
    mass_max: float = 1100.0
    charge: int = 1
    peak_width: float = 0.15
    envelope_mean_per_da: float = 5e-4
    envelope_cutoff: float = 1e-4
    peak_support_sigmas: float = 6.0

    def __post_init__(self):
        if self.n_atoms < 1 or self.n_samples < 2:
            raise ValueError("need n_atoms >= 1 and n_samples >= 2")
        if not self.mass_max > self.mass_min:
            raise ValueError("mass_max must exceed mass_min")
        if self.charge < 1:
            raise ValueError("charge must be a positive integer")
        if self.peak_width < self.grid_step:
            raise ValueError(
                f"peak_width {self.peak_width} is below the grid step {self.grid_step:.6g}; "
                "peaks would fall between samples"
            )
        if not 0.0 < self.envelope_cutoff < 1.0:
            raise ValueError("envelope_cutoff must lie in (0, 1)")

    @property
    def grid_step(self) -> float:
        return (self.mass_max - self.mass_min) / (self.n_samples - 1)

    @property
    def mass_grid(self) -> np.ndarray:
        return np.linspace(self.mass_min, self.mass_max, self.n_samples)

    @property
    def atom_masses(self) -> np.ndarray:
        return np.linspace(self.mass_min, self.mass_max, self.n_atoms)


def build_dictionary(spec: DictionarySpec) -> np.ndarray:
    """Dense (n_samples, n_atoms) dictionary, a deterministic function of ``spec``."""
    grid = spec.mass_grid
    masses = spec.atom_masses
    lam = spec.envelope_mean_per_da * masses
    D = np.zeros((spec.n_samples, spec.n_atoms))
    width = spec.peak_width
    half = spec.peak_support_sigmas * width
    # lam < 1 throughout, so pmf(k)/pmf(0) = lam^k / k! decreases in k and
    # the loop can stop as soon as every column is below the cutoff.
    rel = np.ones(spec.n_atoms)
    k = 0
    while True:
        keep = rel >= spec.envelope_cutoff
        if not keep.any():
            break
        centers = masses + k / spec.charge
        diff = grid[:, None] - centers[None, :]
        peak = np.exp(-0.5 * (diff / width) ** 2)
        peak[np.abs(diff) > half] = 0.0
        D += np.where(keep[None, :], rel[None, :], 0.0) * peak
        k += 1
        rel = rel * lam / k
    peaks = D.max(axis=0)
    if np.any(peaks <= 0.0):
        raise ValueError("dictionary has an empty column; widen the mass window")
    return D / peaks


@dataclass(frozen=True)
class GroundTruth:
    """Sparse nonnegative truth with its support and the seed that drew it."""

    x: np.ndarray = field(repr=False)
    support: np.ndarray = field(repr=False)
    seed: int


def sample_ground_truth(n: int, p_nonzero: int, amplitude_range=(1.0, 100.0), seed: int = 0) -> GroundTruth:
    """Uniform support without replacement, uniform amplitudes."""
    if not 0 < p_nonzero <= n:
        raise ValueError("p_nonzero must lie in [1, n]")
    lo, hi = amplitude_range
    if not 0.0 < lo <= hi:
        raise ValueError("amplitude range must satisfy 0 < lo <= hi")
    rng = np.random.default_rng(seed)
    support = np.sort(rng.choice(n, size=p_nonzero, replace=False))
    x = np.zeros(n)
    x[support] = rng.uniform(lo, hi, size=p_nonzero)
    return GroundTruth(x=x, support=support, seed=seed)


def synthesize_observation(D, x, noise_percent: float, seed: int = 0):
    """(y, sigma) with sigma = (noise_percent/100) * max(D x).

    noise_percent = 0 returns y = D x exactly.
    """
    if noise_percent < 0.0:
        raise ValueError("noise_percent must be >= 0")
    clean = np.asarray(D, dtype=float) @ np.asarray(x, dtype=float)
    if noise_percent == 0.0:
        return clean, 0.0
    peak = float(clean.max(initial=0.0))
    if peak <= 0.0:
        raise ValueError("clean signal has no positive peak; noise scale undefined")
    sigma = (noise_percent / 100.0) * peak
    rng = np.random.default_rng(seed)
    return clean + rng.normal(0.0, sigma, size=clean.shape), sigma


@dataclass(frozen=True)
class Instance:
    """One fully realized benchmark instance."""

    spec: DictionarySpec
    D: np.ndarray = field(repr=False)
    x_true: np.ndarray = field(repr=False)
    support: np.ndarray = field(repr=False)
    y: np.ndarray = field(repr=False)
    sigma: float
    noise_percent: float
    truth_seed: int
    noise_seed: int
    p_nonzero: int
    amplitude_lo: float
    amplitude_hi: float
    dataset: str = "custom"


# Spike counts of the named datasets.
DATASET_SPARSITY = {"A": 48, "B": 94, "small": 10}
_TRUTH_SEEDS = {"A": 7, "B": 11, "small": 3}


def preset_spec(dataset: str) -> DictionarySpec:
    """DictionarySpec of a named dataset: 'A', 'B' (full) or 'small'."""
    if dataset in ("A", "B"):
        return DictionarySpec()
    if dataset == "small":
        # Same 0.1 Da sampling over a shorter window.
        return DictionarySpec(n_atoms=200, n_samples=200, mass_min=1000.0, mass_max=1020.0)
    raise ValueError(f"unknown dataset {dataset!r}; expected 'A', 'B' or 'small'")


def preset_truth_params(dataset: str, p_nonzero: int | None = None):
    """(p_nonzero, truth_seed) of a named dataset, with optional override."""
    if dataset not in DATASET_SPARSITY:
        raise ValueError(f"unknown dataset {dataset!r}")
    return (p_nonzero or DATASET_SPARSITY[dataset]), _TRUTH_SEEDS[dataset]


def make_instance(dataset: str = "A", noise_percent: float = 0.1, noise_seed: int = 0,
                  p_nonzero: int | None = None, amplitude_range=(1.0, 100.0),
                  D: np.ndarray | None = None) -> Instance:
    """Build a named benchmark instance; pass D to reuse a built dictionary."""
    spec = preset_spec(dataset)
    p, truth_seed = preset_truth_params(dataset, p_nonzero)
    if D is None:
        D = build_dictionary(spec)
    truth = sample_ground_truth(spec.n_atoms, p, amplitude_range, truth_seed)
    y, sigma = synthesize_observation(D, truth.x, noise_percent, noise_seed)
    return Instance(
        spec=spec, D=D, x_true=truth.x, support=truth.support, y=y, sigma=sigma,
        noise_percent=noise_percent, truth_seed=truth_seed, noise_seed=noise_seed,
        p_nonzero=p, amplitude_lo=amplitude_range[0], amplitude_hi=amplitude_range[1],
        dataset=dataset,
    )


# ---------------------------------------------------------------------------
# Serialization

_FORMAT_TAG = "ms-instance v1"


def _fmt(v: float) -> str:
    return f"{v:.17g}"


def save_instance(path, instance: Instance) -> None:
    """Write an instance to the self-describing text format (byte-stable)."""
    spec = instance.spec
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# {_FORMAT_TAG}\n[header]\n")
        for f in fields(spec):
            fh.write(f"{f.name} = {getattr(spec, f.name)!r}\n")
        fh.write(f"dataset = {instance.dataset}\n")
        fh.write(f"truth_seed = {instance.truth_seed}\n")
        fh.write(f"noise_seed = {instance.noise_seed}\n")
        fh.write(f"noise_percent = {_fmt(instance.noise_percent)}\n")
        fh.write(f"sigma = {_fmt(instance.sigma)}\n")
        fh.write(f"p_nonzero = {instance.p_nonzero}\n")
        fh.write(f"amplitude_lo = {_fmt(instance.amplitude_lo)}\n")
        fh.write(f"amplitude_hi = {_fmt(instance.amplitude_hi)}\n")
        fh.write("[dictionary]\n")
        for row in instance.D:
            fh.write(" ".join(_fmt(v) for v in row) + "\n")
        fh.write("[x_true]\n")
        fh.write("\n".join(_fmt(v) for v in instance.x_true) + "\n")
        fh.write("[y]\n")
        fh.write("\n".join(_fmt(v) for v in instance.y) + "\n")


def load_instance(path) -> Instance:
    """Read an instance written by save_instance."""
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline().strip()
        if first != f"# {_FORMAT_TAG}":
            raise ValueError(f"not an instance file (missing '{_FORMAT_TAG}' tag)")
        header: dict[str, str] = {}
        section = None
        matrix_rows: list[np.ndarray] = []
        x_vals: list[float] = []
        y_vals: list[float] = []
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("["):
                section = line.strip("[]")
                continue
            if section == "header":
                key, _, val = line.partition("=")
                header[key.strip()] = val.strip()
            elif section == "dictionary":
                matrix_rows.append(np.fromiter(map(float, line.split()), dtype=float))
            elif section == "x_true":
                x_vals.append(float(line))
            elif section == "y":
                y_vals.append(float(line))
            else:
                raise ValueError(f"unexpected content outside sections: {line!r}")
    spec_kwargs = {}
    for f in fields(DictionarySpec):
        raw = header[f.name]
        spec_kwargs[f.name] = int(raw) if f.type == "int" else float(raw)
    spec = DictionarySpec(**spec_kwargs)
    D = np.vstack(matrix_rows)
    x_true = np.array(x_vals)
    if D.shape != (spec.n_samples, spec.n_atoms) or x_true.shape != (spec.n_atoms,):
        raise ValueError("instance file body does not match its header dimensions")
    return Instance(
        spec=spec,
        D=D,
        x_true=x_true,
        support=np.flatnonzero(x_true),
        y=np.array(y_vals),
        sigma=float(header["sigma"]),
        noise_percent=float(header["noise_percent"]),
        truth_seed=int(header["truth_seed"]),
        noise_seed=int(header["noise_seed"]),
        p_nonzero=int(header["p_nonzero"]),
        amplitude_lo=float(header["amplitude_lo"]),
        amplitude_hi=float(header["amplitude_hi"]),
        dataset=header.get("dataset", "custom"),
    )
