"""Projection of optimized harmonic patterns onto realizable candidate sets.

A candidate set holds R gain functions sampled on rectangular
(inclination x azimuth) grids.  Each antenna picks the candidate minimizing
the squared gain mismatch against its optimized pattern over all users' path
angles, the channel is rebuilt from the selected gains, and (optionally) the
digital precoder is refit on the projected channel.

Candidate files are JSON documents::

    {"normalize": true,
     "patterns": [{"name": "...",
                   "theta_deg": [...ascending...],
                   "phi_deg": [...ascending...],
                   "gain": [[...], ...]}  # len(theta) x len(phi), linear
              , ...]}

Gains must be nonnegative; with ``normalize`` true (the default) every
pattern is rescaled on load so its quadrature power equals 4 pi.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .channel import Scenario, assemble_channel
from .harmonics import FULL_SPHERE, synthesize_gain
from .wmmse import SolverConfig, SolverResult, refit_digital, sum_rate


class PatternLoadError(ValueError):
    """A candidate-set document failed validation."""


@dataclass(frozen=True)
class CandidatePattern:
    name: str
    theta: np.ndarray  # radians, ascending
    phi: np.ndarray  # radians, ascending
    gain: np.ndarray  # (n_theta, n_phi)
    power: float  # quadrature of gain^2 over the sphere


@dataclass(frozen=True)
class CandidatePatternSet:
    patterns: tuple
    normalized: bool
    source: str = "memory"

    def __len__(self) -> int:
        return len(self.patterns)


def _theta_weights(theta: np.ndarray) -> np.ndarray:
    """Node weights integrating a piecewise-linear function against sin(theta)
    over [0, pi] exactly, with constant extension beyond the edge nodes."""
    w = np.zeros(theta.size)
    ti, tj = theta[:-1], theta[1:]
    i0 = np.cos(ti) - np.cos(tj)
    i1 = (np.sin(tj) - tj * np.cos(tj)) - (np.sin(ti) - ti * np.cos(ti))
    dt = tj - ti
    w[:-1] += (tj * i0 - i1) / dt
    w[1:] += (i1 - ti * i0) / dt
    w[0] += 1.0 - math.cos(theta[0])  # pole clamp below the first node
    w[-1] += math.cos(theta[-1]) + 1.0  # pole clamp above the last node
    return w


def grid_power(theta: np.ndarray, phi: np.ndarray, gain: np.ndarray) -> float:
    """Quadrature of gain^2 over the sphere on a rectangular grid.

    Exact for the interpolation model used at lookup time: the squared gain
    is integrated as its piecewise-linear interpolant against sin(theta),
    clamped beyond the theta edges and wrapped periodically in phi, so a
    constant pattern integrates to exactly 4 pi times its square.
    """
    th, g = np.asarray(theta, float), np.asarray(gain, float)
    ph = np.asarray(phi, float)
    if ph[-1] - ph[0] < 2.0 * math.pi:
        ph = np.concatenate((ph, [ph[0] + 2.0 * math.pi]))
        g = np.hstack([g, g[:, :1]])
    per_theta = np.trapezoid(g**2, ph, axis=1)
    return float(np.dot(_theta_weights(th), per_theta))


def _validate_axis(values, field: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1 or arr.size < 2:
        raise PatternLoadError(f"{field}: need a 1-D array with at least 2 nodes")
    if np.any(np.diff(arr) <= 0):
        raise PatternLoadError(f"{field}: grid nodes must be strictly ascending")
    return arr


def _build_pattern(record: dict, idx: int, normalize: bool) -> CandidatePattern:
    ctx = f"patterns[{idx}]"
    for key in ("theta_deg", "phi_deg", "gain"):
        if key not in record:
            raise PatternLoadError(f"{ctx}: missing field {key!r}")
    theta = np.deg2rad(_validate_axis(record["theta_deg"], f"{ctx}.theta_deg"))
    phi = np.deg2rad(_validate_axis(record["phi_deg"], f"{ctx}.phi_deg"))
    if theta[0] < 0 or theta[-1] > math.pi + 1e-9:
        raise PatternLoadError(f"{ctx}.theta_deg: inclinations must lie in [0, 180]")
    gain = np.asarray(record["gain"], dtype=float)
    if gain.shape != (theta.size, phi.size):
        raise PatternLoadError(
            f"{ctx}.gain: expected shape {(theta.size, phi.size)}, got {gain.shape}"
        )
    if np.any(~np.isfinite(gain)):
        raise PatternLoadError(f"{ctx}.gain: non-finite sample")
    if np.any(gain < 0):
        raise PatternLoadError(f"{ctx}.gain: negative sample")
    power = grid_power(theta, phi, gain)
    if normalize:
        if power <= 0:
            raise PatternLoadError(f"{ctx}.gain: zero pattern cannot be normalized")
        gain = gain * math.sqrt(FULL_SPHERE / power)
        power = FULL_SPHERE
    return CandidatePattern(
        name=str(record.get("name", f"pattern-{idx}")),
        theta=theta,
        phi=phi,
        gain=gain,
        power=power,
    )


def load_candidates(path) -> CandidatePatternSet:
    """Load and validate a candidate-set document."""
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as err:
        raise PatternLoadError(f"{path}: cannot read candidate set: {err}")
    except json.JSONDecodeError as err:
        raise PatternLoadError(f"{path}: invalid JSON at line {err.lineno}: {err.msg}")
    if not isinstance(doc, dict) or "patterns" not in doc:
        raise PatternLoadError(f"{path}: document must be an object with 'patterns'")
    normalize = bool(doc.get("normalize", True))
    records = doc["patterns"]
    if not records:
        raise PatternLoadError(f"{path}: empty pattern list")
    patterns = tuple(
        _build_pattern(rec, idx, normalize) for idx, rec in enumerate(records)
    )
    return CandidatePatternSet(patterns=patterns, normalized=normalize, source=str(path))


def save_candidates(cset: CandidatePatternSet, path) -> None:
    """Write a candidate set back to the document format (degrees, linear)."""
    doc = {
        "normalize": cset.normalized,
        "patterns": [
            {
                "name": p.name,
                "theta_deg": np.rad2deg(p.theta).tolist(),
                "phi_deg": np.rad2deg(p.phi).tolist(),
                "gain": p.gain.tolist(),
            }
            for p in cset.patterns
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


def candidate_gain(cset: CandidatePatternSet, r: int, theta, phi):
    """Bilinear gain of candidate ``r`` (0-based) at (theta, phi).

    Azimuth wraps at 2 pi; inclination clamps to the grid edge toward the
    poles.  Grid nodes reproduce the stored samples exactly.
    """
    if not 0 <= r < len(cset):
        raise IndexError(f"candidate index {r} out of range [0, {len(cset)})")
    pat = cset.patterns[r]
    ph_axis, g = pat.phi, pat.gain
    if ph_axis[-1] - ph_axis[0] < 2.0 * math.pi:
        ph_axis = np.concatenate((ph_axis, [ph_axis[0] + 2.0 * math.pi]))
        g = np.hstack([g, g[:, :1]])

    th = np.clip(np.asarray(theta, float), pat.theta[0], pat.theta[-1])
    ph = ph_axis[0] + np.mod(np.asarray(phi, float) - ph_axis[0], 2.0 * math.pi)
    ph = np.clip(ph, ph_axis[0], ph_axis[-1])

    i = np.clip(np.searchsorted(pat.theta, th, side="right") - 1, 0, pat.theta.size - 2)
    j = np.clip(np.searchsorted(ph_axis, ph, side="right") - 1, 0, ph_axis.size - 2)
    t = (th - pat.theta[i]) / (pat.theta[i + 1] - pat.theta[i])
    u = (ph - ph_axis[j]) / (ph_axis[j + 1] - ph_axis[j])
    out = (
        (1 - t) * (1 - u) * g[i, j]
        + (1 - t) * u * g[i, j + 1]
        + t * (1 - u) * g[i + 1, j]
        + t * u * g[i + 1, j + 1]
    )
    return float(out) if np.ndim(out) == 0 else out


def project_antenna(c_opt, thetas, phis, cset: CandidatePatternSet) -> int:
    """Index of the candidate closest to the synthesized pattern over the
    given path angles (sum of squared gain mismatches; ties take the lowest
    index)."""
    thetas = np.asarray(thetas, float).ravel()
    phis = np.asarray(phis, float).ravel()
    if thetas.size == 0:
        raise ValueError("need at least one path angle")
    target = synthesize_gain(np.asarray(c_opt, float), thetas, phis)
    best_idx, best_cost = 0, math.inf
    for r in range(len(cset)):
        cand = candidate_gain(cset, r, thetas, phis)
        cost = float(np.sum((np.asarray(cand) - target) ** 2))
        if cost < best_cost:
            best_idx, best_cost = r, cost
    return best_idx


@dataclass
class ProjectedResult:
    indices: np.ndarray  # (N_T,) selected candidate per antenna
    channels: np.ndarray  # (K, N_T) rebuilt channels
    f_d: np.ndarray
    sum_rate: float
    refit: bool


def apply_projection(
    result: SolverResult,
    scenario: Scenario,
    cset: CandidatePatternSet,
    refit: bool = True,
    config: SolverConfig | None = None,
) -> ProjectedResult:
    """Replace each optimized pattern by its closest candidate and rebuild.

    Channels are reassembled from the selected candidate gains at the
    per-element path angles; with ``refit`` on, the combiner/weight/precoder
    updates rerun on the projected channel starting from the converged
    precoder.  The harmonic coefficients play no further role.
    """
    geom = scenario.geometry
    coeffs = result.state.coeffs
    indices = np.empty(geom.n_t, dtype=int)
    for n in range(geom.n_t):
        thetas = [p.thetas[n] for user in scenario.paths for p in user]
        phis = [p.phis[n] for user in scenario.paths for p in user]
        indices[n] = project_antenna(coeffs[n], thetas, phis, cset)

    def gain_fn(n, theta, phi):
        return candidate_gain(cset, int(indices[n]), theta, phi)

    channels = np.stack(
        [assemble_channel(user, geom, gain_fn) for user in scenario.paths]
    )
    if refit:
        f_d, _, _, _ = refit_digital(
            channels,
            scenario.weights,
            scenario.noise_powers,
            scenario.p_max,
            config,
            f_init=result.state.f_d,
        )
    else:
        f_d = result.state.f_d
    rate = sum_rate(channels, f_d, scenario.weights, scenario.noise_powers)
    return ProjectedResult(
        indices=indices, channels=channels, f_d=f_d, sum_rate=rate, refit=refit
    )


def fibonacci_directions(count: int) -> np.ndarray:
    """(count, 2) quasi-uniform (theta, phi) steering directions."""
    i = np.arange(count)
    z = 1.0 - (2.0 * i + 1.0) / count
    theta = np.arccos(np.clip(z, -1.0, 1.0))
    phi = np.mod(i * math.pi * (3.0 - math.sqrt(5.0)), 2.0 * math.pi)
    return np.stack([theta, phi], axis=1)


def steered_candidate_set(
    count: int = 64,
    exponent: float = 2.0,
    n_theta: int = 61,
    n_phi: int = 121,
    normalize: bool = True,
) -> CandidatePatternSet:
    """Synthetic stand-in set: ``count`` cosine-power lobes steered along
    quasi-uniform directions, each normalized to the 4 pi power budget.

    Deterministic (no randomness), nonnegative by construction; a
    placeholder for measured hardware patterns in the same file schema.
    """
    if count < 1:
        raise ValueError("need at least one candidate")
    theta = np.linspace(0.0, math.pi, n_theta)
    phi = np.linspace(0.0, 2.0 * math.pi, n_phi)
    th, ph = theta[:, None], phi[None, :]
    patterns = []
    for r, (th0, ph0) in enumerate(fibonacci_directions(count)):
        cos_angle = np.sin(th) * math.sin(th0) * np.cos(ph - ph0) + np.cos(th) * math.cos(th0)
        gain = np.maximum(cos_angle, 0.0) ** exponent
        power = grid_power(theta, phi, gain)
        if normalize:
            gain = gain * math.sqrt(FULL_SPHERE / power)
            power = FULL_SPHERE
        patterns.append(
            CandidatePattern(
                name=f"steered-{r:02d}", theta=theta, phi=phi, gain=gain, power=power
            )
        )
    return CandidatePatternSet(patterns=tuple(patterns), normalized=normalize)


def sampled_pattern_set(
    coeff_rows, n_theta: int = 181, n_phi: int = 361
) -> CandidatePatternSet:
    """Sample synthesized patterns onto a grid as an in-memory candidate set.

    Audit helper for self-projection checks: samples keep their sign and are
    not renormalized, so file-schema validation (nonnegativity) does not
    apply.  Harmonic patterns on the 4 pi budget already integrate to 4 pi.
    """
    theta = np.linspace(0.0, math.pi, n_theta)
    phi = np.linspace(0.0, 2.0 * math.pi, n_phi)
    patterns = []
    for r, c in enumerate(np.atleast_2d(np.asarray(coeff_rows, float))):
        gain = synthesize_gain(c, theta[:, None], phi[None, :])
        patterns.append(
            CandidatePattern(
                name=f"sampled-{r:02d}",
                theta=theta,
                phi=phi,
                gain=gain,
                power=grid_power(theta, phi, gain),
            )
        )
    return CandidatePatternSet(patterns=tuple(patterns), normalized=False)
