"""The four commands.  Each returns (results dict, exit code) and writes its files into ``out``."""
from __future__ import annotations

import warnings
from pathlib import Path

import numpy as np

from ..escape import EscapeConfig, escape_interval, global_escape, verify_escape
from ..flow import (
    EnergyShellSpec,
    ShellGeometry,
    classify_limit_sets,
    integrate_batch,
    integrate_full,
    sample_energy_surface,
    sphere_points,
    weak_hyperbolicity_check,
)
from ..flow.trajectory import ProjectedFlow
from ..quantum import (
    HermiteBasis2D,
    QuantumState,
    assemble_weyl_matrix,
    coherent_state,
    evolve,
    growth_report,
    random_low_energy_state,
    split_step_floquet,
)
from ..symbols import parse_symbol, resonant_average, seminorm_estimate
from .output import write_csv, write_dat, write_json

EXIT_OK = 0
EXIT_VERIFICATION = 2
EXIT_NUMERICAL = 3
EXIT_CONFIG = 4


def _shell(cfg: dict):
    h = parse_symbol(cfg["h"])
    tol = cfg["tolerances"]
    spec = EnergyShellSpec(h, float(cfg["e0"]), newton_tol=tol["newton"], regularity_floor=tol["regularity_floor"])
    return h, spec


def _limit_sets(cfg: dict, h, spec, geom: ShellGeometry):
    fl = cfg["flow"]
    sample = sample_energy_surface(spec, fl["n_samples"], seed=cfg["seed"], geometry=geom)
    report = classify_limit_sets(geom, spec, n_orbits=fl["n_orbits"], tau_max=fl["tau_max"],
                                 cluster_eps=fl["cluster_eps"], seed=cfg["seed"],
                                 tol=cfg["tolerances"]["integration"], sample=sample)
    return sample, report


# ---------------------------------------------------------------------------


def cmd_flow(cfg: dict, out: Path) -> tuple[dict, int]:
    h, spec = _shell(cfg)
    fl = cfg["flow"]
    geom = ShellGeometry(h, fl["f_tilde"])
    sample, report = _limit_sets(cfg, h, spec, geom)
    wh_error = None
    if report.simple_structure:
        try:
            weak_hyperbolicity_check(report, geom, tube_radius=fl["tube_radius"])
        except RuntimeError as exc:
            wh_error = str(exc)
    limit = report.to_dict()
    limit["surface"] = {"n_points": int(len(sample.points)), "n_components": sample.n_components,
                        "component_sizes": np.bincount(sample.component_id).tolist(), **sample.stats}
    if wh_error:
        limit["weak_hyperbolicity_error"] = wh_error
    write_json(out / "limit_sets.json", limit)

    # a few recorded orbits for plotting
    n_plot = min(fl["n_plot_orbits"], len(sample.points))
    rows = []
    if n_plot:
        idx = np.linspace(0, len(sample.points) - 1, n_plot).astype(int)
        flow = ProjectedFlow(geom, np.full(n_plot, spec.e0))
        res = integrate_batch(flow.rhs, sample.points[idx], fl["orbit_tau"], rtol=cfg["tolerances"]["integration"],
                              atol=cfg["tolerances"]["integration"] * 1e-2, project=flow.project, record=True)
        for k, (tt, yy) in enumerate(res.history):
            rows.extend([k, t, *y] for t, y in zip(tt, yy))
    write_csv(out / "orbits.csv", ["orbit_id", "tau", "x1", "x2", "xi1", "xi2"], rows)

    Xt = geom.projected_field(sample.points)
    cols = np.column_stack([sample.points, sample.component_id, Xt])
    write_dat(out / "phase_portrait.dat", ["x1", "x2", "xi1", "xi2", "component", "Xt_x1", "Xt_x2", "Xt_xi1", "Xt_xi2"],
              cols, comment=f"points of the level {spec.e0!r} on the unit sphere with the projected field")
    results = {"n_components": report.n_components, "simple_structure": report.simple_structure,
               "verdict": report.verdict, "weak_hyperbolicity": report.weak_hyperbolicity,
               "files": ["limit_sets.json", "orbits.csv", "phase_portrait.dat"]}
    return results, EXIT_OK


def cmd_escape(cfg: dict, out: Path) -> tuple[dict, int]:
    h, spec = _shell(cfg)
    es = cfg["escape"]
    geom = ShellGeometry(h, es["f_tilde"])
    _, report = _limit_sets(cfg, h, spec, geom)
    if not report.simple_structure:
        from ..escape import EscapeError

        raise EscapeError(f"simple structure not established (verdict {report.verdict!r})")
    weak_hyperbolicity_check(report, geom, tube_radius=cfg["flow"]["tube_radius"])
    ecfg = EscapeConfig(eps=es["eps"], tube_radius_plus=es["tube_radius"], tube_radius_minus=es["tube_radius"],
                        f_tilde=es["f_tilde"], t1_cap=es["t1_cap"], tol=cfg["tolerances"]["integration"])
    a = global_escape(geom, ecfg, report, seed=cfg["seed"])
    delta = es["delta"] if es["delta"] is not None else a.delta_hat
    threshold = delta / 2
    ver = verify_escape(geom, a, es["n_samples"], es["fd_step"], threshold=threshold, seed=cfg["seed"])
    interval = None
    if es["interval"] and ver.passed:
        iv = escape_interval(geom, a, spec.e0, step=es["interval_step"], n_samples=es["interval_samples"],
                             threshold=threshold, fd_step=es["fd_step"], seed=cfg["seed"],
                             refine=es["interval_refine"])
        interval = iv
    cert = {
        "h": str(h), "e0": spec.e0,
        "delta_hat": a.delta_hat, "delta": delta, "threshold": threshold,
        "min_bracket": ver.min_bracket, "worst_point": ver.worst_point, "passed": ver.passed,
        "interval": None if interval is None else [interval.lo, interval.hi],
        "interval_checks": None if interval is None else interval.checks,
        "sample_counts": {"verify": ver.n_samples, "excluded": ver.n_excluded,
                          "m_check": a.info["m_samples"],
                          "interval_per_level": es["interval_samples"] if interval is not None else 0},
        "tolerances": {"fd_step": es["fd_step"], "integration": cfg["tolerances"]["integration"],
                       "newton": cfg["tolerances"]["newton"]},
        "construction": {**a.to_dict(), "sup_gap_on_sample": a.sup_gap(_verify_points(geom, spec, es, cfg))},
        "limit_sets": report.to_dict(),
    }
    write_json(out / "escape_certificate.json", cert)
    results = {"passed": ver.passed, "min_bracket": ver.min_bracket, "delta_hat": a.delta_hat,
               "interval": cert["interval"], "files": ["escape_certificate.json"]}
    return results, EXIT_OK if ver.passed else EXIT_VERIFICATION


def _verify_points(geom, spec, es, cfg):
    # identical to the points verify_escape drew, so the shell values come from the cache
    return sample_energy_surface(spec, es["n_samples"], seed=cfg["seed"], geometry=geom).points


def cmd_qsim(cfg: dict, out: Path) -> tuple[dict, int]:
    q = cfg["qsim"]
    v0 = parse_symbol(q["v0"])
    basis = HermiteBasis2D(q["N"])
    notes: list[str] = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        init = q["initial"]
        if init["type"] == "coherent":
            z = init.get("z")
            if z is None:
                raise ValueError("initial.z is required for a coherent initial state")
            u0 = coherent_state(z, basis)
        else:
            u0 = random_low_energy_state(basis, init.get("max_degree", 4), cfg["seed"])
        origin = q["time_origin"]
        if origin == "blowdown":
            if init["type"] == "coherent":
                res = integrate_full(v0, np.asarray(init["z"], dtype=float), (0.0, -1e3))
                origin = float(res.blow_down_time) if res.blow_down else 0.0
            else:
                origin = 0.0
        times = np.linspace(0.0, q["t_max"], q["n_times"])
        if q["mode"] == "effective":
            M = assemble_weyl_matrix(v0, basis)
            states = evolve(M, u0, times, method=q["method"])
        else:
            dt = q["dt"]
            stride = max(1, int(round((times[1] - times[0]) / dt)))
            _, record = split_step_floquet(v0, basis, u0, q["t_max"], dt=dt, record_every=stride)
            states = [u0] + [QuantumState(c, basis, t) for t, c in record]
        T0 = q["fit_start"] - origin
        rep = growth_report(states, q["s_list"], leak_cap=q["leak_cap"], T0=T0, time_origin=origin,
                            top_bands=q["top_bands"])
    notes.extend(sorted({str(w.message) for w in caught}))
    s_list = [float(s) for s in q["s_list"]]
    names = [f"norm_{s!r}" for s in s_list]
    rows = [[t, *[rep.norms[s][i] for s in q["s_list"]], rep.leak[i]] for i, t in enumerate(rep.times)]
    write_csv(out / "norms.csv", ["t", *names, "leak"], rows)
    growth = rep.to_dict()
    growth["initial_state"] = init
    growth["mode"] = q["mode"]
    growth["N"] = q["N"]
    growth["solver_warnings"] = notes
    write_json(out / "growth.json", growth)
    clock = np.asarray(rep.times) - origin
    keep = clock > 0
    cols = np.column_stack([np.log(clock[keep])] + [np.log(np.asarray(rep.norms[s])[keep]) for s in q["s_list"]]
                           + [np.asarray(rep.times)[keep]])
    write_dat(out / "norms_loglog.dat", ["log_clock", *[f"log_{n}" for n in names], "t"], cols,
              comment=f"clock = t - ({origin!r}); fit window {growth['window']}")
    results = {"slopes": growth["slopes"], "window": growth["window"], "window_too_short": rep.window_too_short,
               "files": ["norms.csv", "growth.json", "norms_loglog.dat"]}
    return results, EXIT_OK


def cmd_average(cfg: dict, out: Path) -> tuple[dict, int]:
    av = cfg["average"]
    v = parse_symbol(av["v"])
    grid = av["grid"]
    if grid.get("points"):
        pts = np.asarray(grid["points"], dtype=float)
    else:
        n = grid.get("n", 64)
        r_lo, r_hi = grid.get("radius", [1.0, 4.0])
        dirs = sphere_points(n, cfg["seed"])
        radii = np.linspace(r_lo, r_hi, n)
        pts = dirs * radii[:, None]
    avg = resonant_average(v, nodes=av["nodes"])
    vals = avg(pts)
    write_csv(out / "average.csv", ["x1", "x2", "xi1", "xi2", "average"],
              [[*p, val] for p, val in zip(pts, vals)])
    results = {"n_points": int(len(pts)), "nodes_used": int(avg.last_nodes_used), "files": ["average.csv"]}
    sn = av.get("seminorm")
    if sn:
        est = seminorm_estimate(v, sn["j"], sn.get("order", 0.0), sn.get("n_samples", 1000), seed=cfg["seed"])
        results["seminorm"] = {"j": est.j, "order": est.order, "value": est.value, "sample_size": est.sample_size}
    return results, EXIT_OK


COMMANDS = {"flow": cmd_flow, "escape": cmd_escape, "qsim": cmd_qsim, "average": cmd_average}
