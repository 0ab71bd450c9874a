"""Monte Carlo simulation of solved policies on the true random system.

This is the cross-check for every dynamic-programming gain: it replays
the actual per-step mechanics (fresh symbols, channel draws, memory
updates, table lookups) with no reference to the solver's transition
tensors, and reports empirical averages with standard errors.

Replication r of a run seeded s draws from the dedicated stream (s, r),
so reports are bit-reproducible and replications are independent.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import SpecValidationError
from .lookahead import build_markov_kernel
from .models import ProblemSpec
from .scenarios import MemorySpec, ScenarioSolveReport, encoder_action_tables
from .simplex import SimplexGrid, project, simplex_grid

BURN_IN = 1000

_SCENARIO_TAGS = {
    "feedback-finite": "feedback-finite",
    "nofeedback-finite": "nofeedback",
    "vending-feedback": "vending-feedback",
    "vending-nofeedback": "vending-nofeedback",
}


@dataclass(frozen=True)
class PolicyBundle:
    """Everything needed to run a solved policy forward in time."""

    scenario: str
    encoder: tuple
    decoder: tuple
    memory: Optional[MemorySpec] = None
    memory_x: Optional[MemorySpec] = None
    memory_y: Optional[MemorySpec] = None
    vending_action_map: Optional[tuple] = None
    grid_resolution: Optional[int] = None

    @classmethod
    def from_report(cls, report: ScenarioSolveReport) -> "PolicyBundle":
        tag = _SCENARIO_TAGS.get(report.scenario)
        if tag is None:
            raise SpecValidationError(
                [f"no simulator for scenario {report.scenario!r}"]
            )
        params = report.params

        def mem(key):
            block = params.get(key)
            if block is None:
                return None
            return MemorySpec(int(block["num_states"]),
                              np.asarray(block["table"], dtype=int))

        grid_resolution = params.get("grid_resolution")
        return cls(
            scenario=tag,
            encoder=tuple(int(a) for a in report.encoder_policy),
            decoder=report.decoder,
            memory=mem("memory"),
            memory_x=mem("memory_x"),
            memory_y=mem("memory_y"),
            vending_action_map=report.vending_action_map,
            grid_resolution=(None if grid_resolution is None
                             else int(grid_resolution)),
        )


@dataclass(frozen=True)
class SimReport:
    """Empirical averages over replications of a fixed-horizon run."""

    horizon: int
    replications: int
    mean_distortion: float
    std_error: float
    mean_action_cost: Optional[float]
    seed: int

    def to_dict(self) -> dict:
        return {
            "horizon": self.horizon,
            "replications": self.replications,
            "mean_distortion": self.mean_distortion,
            "std_error": self.std_error,
            "mean_action_cost": self.mean_action_cost,
            "seed": self.seed,
        }


def _cdf_rows(matrix) -> list:
    return [np.cumsum(np.asarray(row, dtype=float)).tolist()
            for row in np.asarray(matrix, dtype=float)]


def _pick(cdf_row, r: float) -> int:
    for j, c in enumerate(cdf_row):
        if r < c:
            return j
    return len(cdf_row) - 1


def _fail(msg: str):
    raise SpecValidationError([msg])


def _check_encoder(encoder, num_states: int, num_actions: int) -> np.ndarray:
    enc = np.asarray(encoder, dtype=int)
    if enc.shape != (num_states,):
        _fail(f"encoder addresses {enc.shape} states, expected ({num_states},)")
    if enc.min(initial=0) < 0 or enc.max(initial=0) >= num_actions:
        _fail(f"encoder actions outside 0..{num_actions - 1}")
    return enc


def _check_decoder(decoder, shape, num_symbols: int) -> np.ndarray:
    dec = np.asarray(decoder, dtype=int)
    if dec.shape != shape:
        _fail(f"decoder has shape {dec.shape}, expected {shape}")
    if dec.min(initial=0) < 0 or dec.max(initial=0) >= num_symbols:
        _fail(f"decoder values outside 0..{num_symbols - 1}")
    return dec


def _memory_projection(memory: MemorySpec, grid: SimplexGrid,
                       weight_fn, num_branches: int, num_symbols: int
                       ) -> np.ndarray:
    """Grid-to-grid projection of the belief pushforward, one column per
    conditioning symbol; weight_fn(branch, symbol) weights each
    observation branch."""
    table = np.asarray(memory.table)
    out = np.empty((grid.size, num_symbols), dtype=int)
    for sym in range(num_symbols):
        pushed = np.zeros((grid.size, memory.num_states))
        for z in range(memory.num_states):
            for br in range(num_branches):
                pushed[:, table[z, br]] += grid.points[:, z] * weight_fn(br, sym)
        for g in range(grid.size):
            out[g, sym] = project(grid, pushed[g])
    return out


def _initial_grid_index(grid: SimplexGrid) -> int:
    point = np.zeros(grid.dim)
    point[0] = 1.0
    return project(grid, point)


def simulate(bundle: PolicyBundle, spec: ProblemSpec, d: int, horizon: int,
             replications: int, seed: int) -> SimReport:
    """Run the bundle on the true system and report empirical averages.

    Each replication starts from the all-zeros configuration, discards a
    fixed burn-in, then averages the per-symbol loss (and action cost for
    vending scenarios) over `horizon` further steps.
    """
    if horizon < 1:
        _fail(f"horizon {horizon} must be at least 1")
    if replications < 1:
        _fail(f"replications {replications} must be at least 1")
    if bundle.scenario not in _SCENARIO_TAGS.values():
        _fail(f"unknown scenario tag {bundle.scenario!r}")

    kernel = build_markov_kernel(spec.source, d)
    codec = kernel.codec
    n_v, n_u = codec.size, codec.base
    n_x, n_y = spec.num_channel_inputs, spec.num_channel_outputs
    atab = encoder_action_tables(n_v, n_x)
    shift = codec.shift_table().tolist()
    first = codec.components_table()[:, 0]
    loss = np.asarray(spec.distortion.loss)
    loss_first = loss[first].tolist()                          # (V, C)
    cdf_u = np.cumsum(np.asarray(spec.source.p)).tolist()
    cdf_w = _cdf_rows(spec.channel.rows)
    atab_l = atab.tolist()

    loss_means = []
    cost_means = []
    vending = bundle.scenario.startswith("vending")

    if vending:
        if spec.vending is None:
            _fail("vending scenarios need vending data in the problem")
        if bundle.memory_x is None or bundle.memory_y is None:
            _fail("vending scenarios need both memory specs")
        if bundle.vending_action_map is None:
            _fail("vending scenarios need an actuator map")
        mem_x, mem_y = bundle.memory_x, bundle.memory_y
        n_m, n_n = mem_x.num_states, mem_y.num_states
        n_av = spec.vending.num_actions
        n_ys = spec.vending.kernel.num_outputs
        if mem_x.check(n_x) or mem_y.check(n_ys):
            _fail("vending memory tables do not match the alphabets")
        av = np.asarray(bundle.vending_action_map, dtype=int)
        if av.shape != (n_x,) or av.min() < 0 or av.max() >= n_av:
            _fail(f"actuator map must send {n_x} inputs to 0..{n_av - 1}")
        dec = _check_decoder(bundle.decoder, (n_x, n_ys, n_m, n_n),
                             spec.num_reconstructions).tolist()
        vk = np.asarray(spec.vending.kernel.rows).reshape(n_u, n_av, n_ys)
        cdf_vend = [_cdf_rows(vk[u]) for u in range(n_u)]
        costs = np.asarray(spec.vending.costs.cost).tolist()
        mx = np.asarray(mem_x.table).tolist()
        ny = np.asarray(mem_y.table).tolist()
        av_l = av.tolist()
        first_l = first.tolist()

        if bundle.scenario == "vending-feedback":
            enc = _check_encoder(bundle.encoder, n_v * n_m * n_n,
                                 atab.shape[0])
            enc3 = enc.reshape(n_v, n_m, n_n).tolist()
            for rep in range(replications):
                rng = np.random.default_rng([seed, rep])
                ru = rng.random(horizon + BURN_IN).tolist()
                ry = rng.random(horizon + BURN_IN).tolist()
                v = m = n = 0
                tot = 0.0
                cost_tot = 0.0
                for t in range(horizon + BURN_IN):
                    u = _pick(cdf_u, ru[t])
                    vt = shift[v][u]
                    a = enc3[v][m][n]
                    x = atab_l[a][vt]
                    act = av_l[x]
                    y = _pick(cdf_vend[first_l[vt]][act], ry[t])
                    if t >= BURN_IN:
                        tot += loss_first[vt][dec[x][y][m][n]]
                        cost_tot += costs[act]
                    m = mx[m][x]
                    n = ny[n][y]
                    v = vt
                loss_means.append(tot / horizon)
                cost_means.append(cost_tot / horizon)
        else:
            if bundle.grid_resolution is None:
                _fail("the open-loop vending scenario needs a grid resolution")
            grid_m = simplex_grid(n_m, bundle.grid_resolution)
            grid_n = simplex_grid(n_n, bundle.grid_resolution)
            enc = _check_encoder(bundle.encoder,
                                 n_v * grid_m.size * grid_n.size,
                                 atab.shape[0])
            enc3 = enc.reshape(n_v, grid_m.size, grid_n.size).tolist()
            proj_m = _memory_projection(
                mem_x, grid_m, lambda br, sym: 1.0 if br == sym else 0.0,
                n_x, n_x,
            ).tolist()
            # belief over the y-memory advances with weights P(y | u, a_v)
            proj_n = np.empty((grid_n.size, n_u, n_av), dtype=int)
            for u in range(n_u):
                for act in range(n_av):
                    proj_n[:, u, act] = _memory_projection(
                        mem_y, grid_n,
                        lambda br, sym, _u=u, _a=act: vk[_u, _a, br],
                        n_ys, 1,
                    )[:, 0]
            proj_n_l = proj_n.tolist()
            g_m0, g_n0 = _initial_grid_index(grid_m), _initial_grid_index(grid_n)
            for rep in range(replications):
                rng = np.random.default_rng([seed, rep])
                ru = rng.random(horizon + BURN_IN).tolist()
                ry = rng.random(horizon + BURN_IN).tolist()
                v, gm, gn = 0, g_m0, g_n0
                m = n = 0
                tot = 0.0
                cost_tot = 0.0
                for t in range(horizon + BURN_IN):
                    u = _pick(cdf_u, ru[t])
                    vt = shift[v][u]
                    a = enc3[v][gm][gn]
                    x = atab_l[a][vt]
                    act = av_l[x]
                    unew = first_l[vt]
                    y = _pick(cdf_vend[unew][act], ry[t])
                    if t >= BURN_IN:
                        tot += loss_first[vt][dec[x][y][m][n]]
                        cost_tot += costs[act]
                    m = mx[m][x]
                    n = ny[n][y]
                    gm = proj_m[gm][x]
                    gn = proj_n_l[gn][unew][act]
                    v = vt
                loss_means.append(tot / horizon)
                cost_means.append(cost_tot / horizon)
    else:
        if bundle.memory is None:
            _fail("this scenario needs a decoder memory spec")
        memory = bundle.memory
        n_z = memory.num_states
        if memory.check(n_y):
            _fail("memory table does not match the channel outputs")
        dec = _check_decoder(bundle.decoder, (n_y, n_z),
                             spec.num_reconstructions).tolist()
        mem = np.asarray(memory.table).tolist()

        if bundle.scenario == "feedback-finite":
            enc = _check_encoder(bundle.encoder, n_v * n_z, atab.shape[0])
            enc2 = enc.reshape(n_v, n_z).tolist()
            for rep in range(replications):
                rng = np.random.default_rng([seed, rep])
                ru = rng.random(horizon + BURN_IN).tolist()
                ry = rng.random(horizon + BURN_IN).tolist()
                v = z = 0
                tot = 0.0
                for t in range(horizon + BURN_IN):
                    u = _pick(cdf_u, ru[t])
                    vt = shift[v][u]
                    a = enc2[v][z]
                    x = atab_l[a][vt]
                    y = _pick(cdf_w[x], ry[t])
                    if t >= BURN_IN:
                        tot += loss_first[vt][dec[y][z]]
                    z = mem[z][y]
                    v = vt
                loss_means.append(tot / horizon)
        else:
            if bundle.grid_resolution is None:
                _fail("the open-loop scenario needs a grid resolution")
            grid = simplex_grid(n_z, bundle.grid_resolution)
            enc = _check_encoder(bundle.encoder, n_v * grid.size,
                                 atab.shape[0])
            enc2 = enc.reshape(n_v, grid.size).tolist()
            w = np.asarray(spec.channel.rows)
            proj = _memory_projection(
                memory, grid, lambda br, sym: w[sym, br], n_y, n_x,
            ).tolist()
            g0 = _initial_grid_index(grid)
            for rep in range(replications):
                rng = np.random.default_rng([seed, rep])
                ru = rng.random(horizon + BURN_IN).tolist()
                ry = rng.random(horizon + BURN_IN).tolist()
                v, g, z = 0, g0, 0
                tot = 0.0
                for t in range(horizon + BURN_IN):
                    u = _pick(cdf_u, ru[t])
                    vt = shift[v][u]
                    a = enc2[v][g]
                    x = atab_l[a][vt]
                    y = _pick(cdf_w[x], ry[t])
                    if t >= BURN_IN:
                        tot += loss_first[vt][dec[y][z]]
                    z = mem[z][y]
                    g = proj[g][x]
                    v = vt
                loss_means.append(tot / horizon)

    mean = float(np.mean(loss_means))
    if replications > 1:
        se = float(np.std(loss_means, ddof=1) / np.sqrt(replications))
    else:
        se = 0.0
    cost = float(np.mean(cost_means)) if cost_means else None
    return SimReport(
        horizon=int(horizon),
        replications=int(replications),
        mean_distortion=mean,
        std_error=se,
        mean_action_cost=cost,
        seed=int(seed),
    )
