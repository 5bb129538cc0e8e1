use regml_core::analysis::{self, Field, Side, Verdict};
use regml_core::config::RunConfig;
use regml_core::trajectories;

fn config(mollifier: &str, profile: &str, x_min: f64, x_max: f64, dx: f64) -> RunConfig {
    RunConfig::from_toml(&format!(
        r#"
[grid]
x_min = {x_min}
x_max = {x_max}
dx = {dx}

[model]
b0 = 1.0
t_end = 0.5
eps = 0.1
q = 1.0

[mollifier]
kind = "{mollifier}"

[scaling]
kind = "constant"
c = 0.1

[initial]
kind = "delta_net"
profile = "{profile}"

[solver]
method = "rk4"
"#
    ))
    .unwrap()
}

#[test]
fn left_kernel_confines_fields_to_the_left() {
    let cfg = config("left_bump", "left_bump", -4.0, 1.0, 0.01);
    assert!(cfg.validate().is_empty(), "{:?}", cfg.validate());
    let sol = cfg.run(0.1, false).unwrap();
    assert!(sol.outcome.is_completed());
    let r = analysis::support_probe(&sol, 0.05, Side::Right).unwrap();
    assert!(r.relative.max() <= 1e-8, "{r:?}");
    assert!(r.global_max.e > 0.0 && r.global_max.u > 0.0);
    assert!(sol.sup_norm() < sol.meta.a_priori_bound);
}

#[test]
fn right_kernel_confines_fields_to_the_right() {
    let cfg = config("right_bump", "right_bump", -1.0, 4.0, 0.01);
    let sol = cfg.run(0.1, false).unwrap();
    let r = analysis::support_probe(&sol, -0.05, Side::Left).unwrap();
    assert!(r.relative.max() <= 1e-8, "{r:?}");
}

#[test]
fn symmetric_kernel_spreads_both_ways() {
    let cfg = config("symmetric_bump", "symmetric_bump", -3.0, 3.0, 0.01);
    let sol = cfg.run(0.1, false).unwrap();
    let r = analysis::support_probe(&sol, 0.5, Side::Right).unwrap();
    let l = analysis::support_probe(&sol, -0.5, Side::Left).unwrap();
    assert!(r.sup.e > 1e-6 && l.sup.e > 1e-6, "{r:?} {l:?}");
}

#[test]
fn charge_on_the_light_line_is_obstructed() {
    let mut cfg = config("left_bump", "left_bump", -4.0, 1.0, 0.01);
    cfg.scaling.c = 0.1;
    let text = format!(
        "{}\n[sweep]\neps = [0.2, 0.1, 0.05]\n\n[[sweep.observables]]\nname = \"Q\"\nfield = \"q\"\ncenter = [0.3, 0.3]\nradii = [0.1, 0.1]\ntarget = \"diagonal\"\n",
        cfg.to_toml().unwrap()
    );
    let cfg = RunConfig::from_toml(&text).unwrap();
    assert!(cfg.validate().is_empty(), "{:?}", cfg.validate());
    let obs = cfg.sweep_observables().unwrap();
    assert!(obs[0].target.unwrap() > 0.05);
    let res = analysis::limit_sweep(&cfg.sweep.as_ref().unwrap().eps, &obs, |eps| cfg.run(eps, true)).unwrap();
    let q = &res.observables[0];
    assert_eq!(q.pairings.len(), 3);
    assert!(q.pairings.iter().all(|p| p.abs() <= 1e-8), "{q:?}");
    assert_eq!(q.verdict, Verdict::Diverging { reason: "support obstruction".into() });
}

#[test]
fn world_lines_right_of_a_left_run_are_stationary() {
    let cfg = config("left_bump", "left_bump", -4.0, 1.0, 0.01);
    let sol = cfg.run(0.1, false).unwrap();
    let dr = sol.times[1] - sol.times[0];
    for x0 in [0.05, 0.3] {
        let tr = trajectories::integrate_world_line(&sol, (0.0, x0), 0.5, dr).unwrap();
        assert!(!tr.exited);
        assert!(tr.w.iter().all(|&w| w == x0));
    }
    let moving = trajectories::integrate_world_line(&sol, (0.0, -0.3), 0.5, dr).unwrap();
    assert!(moving.max_speed() < 1.0);
}

#[test]
fn small_charges_approach_the_linearized_solution() {
    let base = config("symmetric_bump", "symmetric_bump", -3.0, 3.0, 0.01);
    let err = |q: f64| {
        let mut c = base.clone();
        c.model.q = q;
        c.model.b0 = 0.0;
        let sol = c.run(0.1, false).unwrap();
        let cmp = analysis::compare_linearized(&sol, q);
        (cmp.max_err_e / q, cmp.max_err_u / q)
    };
    let (e_small, _) = err(1e-3);
    let (e_big, _) = err(1e-2);
    let (e_large, _) = err(10.0);
    // The remaining relative error is the regularization of the jump, not
    // nonlinearity; it must not grow as q shrinks, and large q departs.
    assert!(e_small <= e_big * (1.0 + 1e-6), "{e_small} {e_big}");
    assert!(e_large > e_small, "{e_large} {e_small}");
}

#[test]
fn product_term_grows_as_eps_shrinks() {
    let cfg = config("symmetric_bump", "symmetric_bump", -3.0, 3.0, 0.01);
    let runs: Vec<_> = [0.2, 0.1, 0.05].iter().map(|&e| cfg.run(e, true).unwrap()).collect();
    let r = analysis::blow_up_probe(&runs, 0.0, 0.1);
    assert!(r.exponent.unwrap() > 0.0, "{r:?}");
}

#[test]
fn picard_matches_rk4_on_a_delta_run() {
    let cfg = config("left_bump", "left_bump", -3.0, 1.0, 0.01);
    let s = cfg.setup(0.1, false).unwrap();
    let rk = regml_core::solver::solve_lines(&s.initial, &regml_core::SolverConfig::rk4().with_dt(0.01), &s.op, &s.params).unwrap();
    let pc_cfg = regml_core::SolverConfig::picard().with_dt(0.01 / 8.0).with_save_every(8);
    let pc = regml_core::solver::solve_picard(&s.initial, &pc_cfg, &s.op, &s.params).unwrap();
    // The left kernel is downwind for rightward transport, so this run grows
    // by orders of magnitude; compare relative to the current size.
    let mut worst = 0.0f64;
    for (a, b) in rk.states.iter().zip(&pc.states) {
        assert!((a.t - b.t).abs() < 1e-12);
        let scale = a.sup_norm();
        for i in 0..a.len() {
            let d = (a.e[i] - b.e[i]).abs().max((a.u[i] - b.u[i]).abs()).max((a.sigma[i] - b.sigma[i]).abs());
            worst = worst.max(d / scale);
        }
    }
    assert!(worst < 1e-2, "{worst}");
    let pair = |sol| analysis::pair(sol, Field::E, &analysis::TestFunction2D::new(0.25, -0.2, 0.2, 0.3).unwrap()).unwrap();
    let (p1, p2) = (pair(&rk), pair(&pc));
    assert!((p1 - p2).abs() < 1e-2 * p1.abs(), "{p1} {p2}");
}
