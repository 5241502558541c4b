"""Exhaustive grid search for the best (teams, team size) configuration."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

from .analytics import Regime, Scenario, TrafficParams, evaluate
from .channel import OnOffChannel
from .detection import fused_pd, fused_pf
from .errors import GcmacError, InvalidParameterError, NoFeasibleConfigurationError

CONSTRAINTS = ("team-budget", "false-alarm", "detection")
SWEEP_AXES = ("p", "K", "pf_th", "rho")

_TIE_TOL = 1e-12


@dataclass(frozen=True)
class GridPoint:
    teams: int
    team_size: int
    achievable: float
    throughput: float
    overhead: float
    flags: dict

    @property
    def feasible(self) -> bool:
        return all(self.flags.values())


@dataclass(frozen=True)
class OptimizationResult:
    regime: str
    best_u: int
    best_q: int
    best_value: float
    best_throughput: float
    best_overhead: float
    normalizer: float
    feasible_grid: tuple[GridPoint, ...]
    binding_constraints: tuple[str, ...] = ()

    @property
    def normalized(self) -> dict:
        n = self.normalizer
        return {
            "throughput": self.best_throughput / n,
            "overhead": self.best_overhead / n,
            "achievable": self.best_value / n,
        }

    def to_dict(self) -> dict:
        d = asdict(self)
        d["feasible_grid"] = [asdict(g) for g in self.feasible_grid]
        d["binding_constraints"] = list(self.binding_constraints)
        d["normalized"] = self.normalized
        return d


def _better(a: GridPoint, b: GridPoint | None) -> bool:
    """Whether ``a`` beats the incumbent ``b``: higher value, then fewer cooperators, then smaller q."""
    if b is None:
        return True
    scale = max(1.0, abs(a.achievable), abs(b.achievable))
    if a.achievable > b.achievable + _TIE_TOL * scale:
        return True
    if a.achievable < b.achievable - _TIE_TOL * scale:
        return False
    return (a.teams * a.team_size, a.team_size) < (b.teams * b.team_size, b.team_size)


def _flags(sc: Scenario, U: int, q: int) -> dict:
    return {
        "team-budget": U * q <= sc.sus,
        "false-alarm": fused_pf(q, sc.pf) <= sc.pf_threshold,
        "detection": fused_pd(q, sc.pd) >= sc.pd_threshold,
    }


def _best(points, ignore: str | None = None) -> GridPoint | None:
    best = None
    for g in points:
        if all(ok for name, ok in g.flags.items() if name != ignore) and _better(g, best):
            best = g
    return best


def _empty_reason(sc: Scenario) -> str:
    if sc.sus < 1:
        return "team-budget"
    qs = range(1, sc.sus + 1)
    pf_ok = [q for q in qs if fused_pf(q, sc.pf) <= sc.pf_threshold]
    if not pf_ok:
        return "false-alarm"
    return "detection"


def optimize(sc: Scenario, regime: Regime | str) -> OptimizationResult:
    """Maximise achievable throughput over every (U, q) with q*U <= K and U <= C.

    Raises:
        NoFeasibleConfigurationError: if no grid point meets the false-alarm
            and detection thresholds.
    """
    if isinstance(regime, str):
        regime = Regime.parse(regime)
    grid: list[GridPoint] = []
    K, C = sc.sus, sc.channels
    for q in range(1, K + 1):
        for U in range(1, min(C, K // q) + 1):
            rep = evaluate(sc.with_teams(U, q), regime)
            grid.append(GridPoint(U, q, rep.achievable, rep.throughput, rep.overhead, _flags(sc, U, q)))
    best = _best(grid)
    if best is None:
        raise NoFeasibleConfigurationError(_empty_reason(sc))

    binding = []
    for name in CONSTRAINTS:
        relaxed = _relaxed_best(sc, regime, grid, name)
        if relaxed is not None and relaxed.achievable > best.achievable + _TIE_TOL * max(1.0, abs(best.achievable)):
            binding.append(name)

    norm = evaluate(sc.with_teams(best.teams, best.team_size), regime).normalizer
    return OptimizationResult(
        regime=regime.value,
        best_u=best.teams,
        best_q=best.team_size,
        best_value=best.achievable,
        best_throughput=best.throughput,
        best_overhead=best.overhead,
        normalizer=norm,
        feasible_grid=tuple(grid),
        binding_constraints=tuple(binding),
    )


def _relaxed_best(sc: Scenario, regime: Regime, grid, name: str) -> GridPoint | None:
    if name != "team-budget":
        return _best(grid, ignore=name)
    # without the budget, U may reach C for any q up to K
    extra = []
    for q in range(1, sc.sus + 1):
        for U in range(min(sc.channels, sc.sus // q) + 1, sc.channels + 1):
            rep = evaluate(sc.with_teams(U, q), regime)
            flags = _flags(sc, U, q)
            flags["team-budget"] = True
            extra.append(GridPoint(U, q, rep.achievable, rep.throughput, rep.overhead, flags))
    return _best(list(grid) + extra, ignore="team-budget")


@dataclass(frozen=True)
class SweepPoint:
    axis: str
    value: float
    result: OptimizationResult | None = None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.result is not None


def apply_axis(sc: Scenario, axis: str, value) -> Scenario:
    """Return ``sc`` with one sweep parameter changed."""
    if axis == "p":
        return replace(sc, channel=OnOffChannel.from_availability(float(value), sc.channel.mu_off))
    if axis == "K":
        return replace(sc, sus=int(value), teams=1, team_size=1)
    if axis == "pf_th":
        return replace(sc, pf_threshold=float(value))
    if axis == "rho":
        return replace(sc, traffic=TrafficParams(load=float(value)))
    raise InvalidParameterError(f"unknown sweep axis {axis!r}; expected one of {SWEEP_AXES}")


def sweep(sc: Scenario, regime: Regime | str, axis: str, values: Sequence) -> list[SweepPoint]:
    """Optimise independently at each axis value; failures become error markers."""
    if axis not in SWEEP_AXES:
        raise InvalidParameterError(f"unknown sweep axis {axis!r}; expected one of {SWEEP_AXES}")
    if len(values) == 0:
        raise InvalidParameterError("sweep needs at least one value")
    out = []
    for v in values:
        try:
            out.append(SweepPoint(axis, v, optimize(apply_axis(sc, axis, v), regime)))
        except NoFeasibleConfigurationError as exc:
            out.append(SweepPoint(axis, v, error=f"infeasible: {exc.constraint}"))
        except GcmacError as exc:
            out.append(SweepPoint(axis, v, error=str(exc)))
    return out
