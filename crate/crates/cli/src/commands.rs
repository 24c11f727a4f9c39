use crate::config::{usage, Params};
use crate::output::{curve_script, heatmap_script, num, opt, versions, RunManifest, Sink};
use crate::*;
use anyhow::Result;
use deformed_sine::classical_pv::compare_classical;
use deformed_sine::fredholm::{weight_determinant, DetConfig, DetMethod};
use deformed_sine::pde_lab::{
    build_sigma_surface, calibrate_constants, node_residual, pde_residuals, profile_by_name,
    PdeResidualReport, SigmaSurface, SurfaceConfig, Q_THRESHOLD, Q_THRESHOLD_CONDITIONED,
};
use deformed_sine::scattering::{
    default_pde_patch, pde_check, roundtrip_check, InitialDatum, TableConfig, W_from_f,
};
use deformed_sine::weights::{ProfileFamily, ProfileSpec, Weight, WeightSpec};
use deformed_sine::zs::{
    compute_u1_calibrated, second_log_derivative, solve_fields, verify_trace_identities,
    zs_flow_residual, zs_lambda_grid,
};
use deformed_sine::Complex64;
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

/// `Γ(3/4)`.
const GAMMA_3_4: f64 = 1.225_416_702_465_177_6;

pub struct Outcome {
    pub manifest: RunManifest,
    /// Named threshold violations; empty means pass.
    pub failures: Vec<String>,
}

struct Run {
    command: String,
    params: Params,
    sink: Sink,
    summary: BTreeMap<String, f64>,
    failures: Vec<String>,
    start: Instant,
}

impl Run {
    fn new(command: &str, common: &Common) -> Result<Self> {
        let mut params = Params::load(common.config.as_deref())?;
        let dir = params.string(
            "out_dir",
            common.out_dir.as_ref().map(|p| p.display().to_string()),
            "dsine-out",
        )?;
        Ok(Run {
            command: command.into(),
            params,
            sink: Sink::new(&PathBuf::from(dir)),
            summary: BTreeMap::new(),
            failures: Vec::new(),
            start: Instant::now(),
        })
    }

    fn note(&mut self, name: &str, value: f64) {
        self.summary.insert(name.into(), value);
    }

    /// Record `value` and fail when `ok` is false.
    fn check(&mut self, name: &str, value: f64, ok: bool, bound: &str) {
        self.note(name, value);
        if !ok {
            self.failures
                .push(format!("{name} = {value:.6e} (required {bound})"));
        }
    }

    fn finish(mut self) -> Result<Outcome> {
        self.params.finish()?;
        let toml = self.params.to_toml()?;
        self.sink.text("parameters.toml", &toml)?;
        let mut manifest = RunManifest {
            command: self.command,
            parameters: self.params.resolved,
            versions: versions(),
            outputs: self.sink.written.clone(),
            residual_summary: self.summary,
            wall_time: self.start.elapsed().as_secs_f64(),
        };
        let path = self.sink.dir.join("manifest.json");
        manifest.outputs.push(path.display().to_string());
        self.sink.json("manifest.json", &manifest)?;
        Ok(Outcome {
            manifest,
            failures: self.failures,
        })
    }
}

pub fn dispatch(cmd: Command) -> Result<Outcome> {
    match cmd {
        Command::Det(a) => det(a),
        Command::Surface(a) => surface(a),
        Command::Fields(a) => fields(a),
        Command::Scattering(a) => scattering("scattering", a, None),
        Command::Classical(a) => classical("classical", a, None),
        Command::Verify(Verify::Zs(a)) => verify_zs(a),
        Command::Verify(Verify::Pde(a)) => verify_pde(a),
        Command::Verify(Verify::Trace(a)) => verify_trace(a),
        Command::Verify(Verify::Scattering(a)) => {
            let VerifyScatteringArgs {
                run,
                threshold,
                w0_tol,
                order_tol,
            } = a;
            scattering(
                "verify scattering",
                run,
                Some((threshold, w0_tol, order_tol)),
            )
        }
        Command::Verify(Verify::Classical(a)) => {
            let VerifyClassicalArgs {
                run,
                threshold,
                log_threshold,
            } = a;
            classical("verify classical", run, Some((threshold, log_threshold)))
        }
        Command::CalibrateConstants(a) => calibrate(a),
    }
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(usage(format!("{name} must be positive, got {v}")))
    }
}

fn weight(p: &mut Params, a: &WeightArgs, default: &str) -> Result<Arc<dyn Weight>> {
    let name = p.string("weight", a.weight.clone(), default)?;
    let alpha = p.f64("alpha", a.alpha, 1.0)?;
    let epsilon = p.f64("epsilon", a.epsilon, 0.05)?;
    let y = p.opt_f64("y", a.y)?;
    let tol = p.opt_f64("truncation_tol", a.truncation_tol)?;
    Ok(match y {
        Some(y) => {
            let mut spec = ProfileSpec::new(ProfileFamily::from_name(&name)?, y)?;
            if let Some(t) = tol {
                spec.truncation_tol = t;
            }
            Arc::new(spec)
        }
        None => {
            let mut spec = WeightSpec::from_name(&name, Some(alpha), Some(epsilon))?;
            if let Some(t) = tol {
                spec = spec.with_truncation_tol(t)?;
            }
            Arc::new(spec)
        }
    })
}

fn det_config(p: &mut Params, a: &QuadArgs) -> Result<DetConfig> {
    let d = DetConfig::default();
    let method = match p.string("method", a.method.clone(), "conjugated")?.as_str() {
        "conjugated" => DetMethod::Conjugated,
        "interval" => DetMethod::Interval,
        m => return Err(usage(format!("unknown method '{m}'"))),
    };
    Ok(DetConfig {
        order: p.usize("order", a.order, d.order)?,
        tol: p.f64("quad_tol", a.quad_tol, d.tol)?,
        max_levels: p.usize("max_levels", a.max_levels, d.max_levels)?,
        method,
        panels: p.opt_usize("panels", a.panels)?,
    })
}

fn det(a: DetArgs) -> Result<Outcome> {
    let mut run = Run::new("det", &a.common)?;
    let w = weight(&mut run.params, &a.weight, "fermi")?;
    let s = positive("s", run.params.f64("s", a.s, 1.0)?)?;
    let cfg = det_config(&mut run.params, &a.quad)?;
    let r = weight_determinant(w, s, &cfg)?;
    println!("{}", serde_json::to_string_pretty(&r)?);
    run.sink.json("det.json", &r)?;
    run.note("est_error", r.est_error);
    run.finish()
}

struct Grid2 {
    profile: ProfileSpec,
    cfg: SurfaceConfig,
    q_threshold: f64,
}

fn grid_args(
    p: &mut Params,
    a: &GridArgs,
    default: SurfaceConfig,
    q_default: f64,
) -> Result<Grid2> {
    let profile = profile_by_name(&p.string("profile", a.profile.clone(), "fermi_factor")?)?;
    let (y_min, y_max) = p.range("y_range", a.y_range.clone(), (default.y_min, default.y_max))?;
    let (s_min, s_max) = p.range("s_range", a.s_range.clone(), (default.s_min, default.s_max))?;
    let cfg = SurfaceConfig {
        y_min,
        y_max,
        s_min,
        s_max,
        h_y: positive("hy", p.f64("hy", a.hy, default.h_y)?)?,
        h_s: positive("hs", p.f64("hs", a.hs, default.h_s)?)?,
        order: p.usize("order", a.order, default.order)?,
    };
    let q_threshold = p.f64("q_threshold", a.q_threshold, q_default)?;
    Ok(Grid2 {
        profile,
        cfg,
        q_threshold,
    })
}

fn surface_rows(surf: &SigmaSurface, q_threshold: f64) -> (Vec<Vec<String>>, Vec<Vec<String>>) {
    let mut main = Vec::new();
    let mut det = Vec::new();
    for iy in 0..surf.ny() {
        for is in 0..surf.ns() {
            let r = node_residual(surf, iy, is, q_threshold);
            let (y, s) = (surf.y_grid[iy], surf.s_grid[is]);
            let valid = surf.valid[iy][is];
            main.push(vec![
                num(y),
                num(s),
                opt(valid.then(|| surf.sigma[iy][is].re)),
                opt(surf.p[iy][is].map(|z| z.re)),
                opt(surf.q[iy][is].map(|z| z.re)),
                opt(r.sigma_form),
                opt(r.q_form),
                opt(r.coupled),
            ]);
            det.push(vec![
                num(y),
                num(s),
                opt(valid.then(|| surf.sigma[iy][is].re)),
                num(surf.q_det[iy][is].re),
            ]);
        }
    }
    (main, det)
}

const SURFACE_HEADER: [&str; 8] = [
    "y",
    "s",
    "sigma",
    "p",
    "q",
    "res_sigma_form",
    "res_q_form",
    "res_coupled",
];

fn write_surface(run: &mut Run, surf: &SigmaSurface, q_threshold: f64) -> Result<()> {
    let (main, det) = surface_rows(surf, q_threshold);
    run.sink.csv("surface.csv", &SURFACE_HEADER, &main)?;
    run.sink
        .csv("surface_det.csv", &["y", "s", "sigma", "Q"], &det)?;
    let script = heatmap_script(
        "surface.csv",
        &[
            (6, "σ-form residual"),
            (7, "q-form residual"),
            (8, "coupled residual"),
        ],
        "surface_residuals.png",
    );
    run.sink.text("surface_residuals.gp", &script)?;
    Ok(())
}

fn note_report(run: &mut Run, prefix: &str, r: &PdeResidualReport) {
    for (name, st) in [
        ("sigma_form", &r.sigma_form),
        ("q_form", &r.q_form),
        ("coupled", &r.coupled),
    ] {
        run.note(&format!("{prefix}{name}_max"), st.max);
        run.note(&format!("{prefix}{name}_max_normalized"), st.max_normalized);
    }
}

fn surface(a: SurfaceArgs) -> Result<Outcome> {
    let mut run = Run::new("surface", &a.common)?;
    let g = grid_args(
        &mut run.params,
        &a.grid,
        SurfaceConfig::default(),
        Q_THRESHOLD,
    )?;
    let surf = build_sigma_surface(&g.profile, &g.cfg)?;
    write_surface(&mut run, &surf, g.q_threshold)?;
    let rep = pde_residuals(&surf, g.q_threshold);
    note_report(&mut run, "", &rep);
    run.finish()
}

#[derive(Serialize)]
struct PdeSummary {
    order_sigma_form: f64,
    order_q_form: f64,
    order_coupled: f64,
    determinants: usize,
    coarse: [deformed_sine::pde_lab::ResidualStats; 3],
    fine: [deformed_sine::pde_lab::ResidualStats; 3],
}

fn verify_pde(a: VerifyPdeArgs) -> Result<Outcome> {
    let mut run = Run::new("verify pde", &a.common)?;
    let g = grid_args(
        &mut run.params,
        &a.grid,
        SurfaceConfig::default(),
        Q_THRESHOLD_CONDITIONED,
    )?;
    let tol = run.params.f64("order_tol", a.order_tol, 0.3)?;
    let coarse = build_sigma_surface(&g.profile, &g.cfg)?;
    let fine = build_sigma_surface(&g.profile, &g.cfg.refined())?;
    let study = deformed_sine::pde_lab::convergence_study(&coarse, &fine, g.q_threshold)?;
    write_surface(&mut run, &coarse, g.q_threshold)?;
    let stats = |r: &PdeResidualReport| [r.sigma_form, r.q_form, r.coupled];
    run.sink.json(
        "pde_report.json",
        &PdeSummary {
            order_sigma_form: study.order_sigma_form,
            order_q_form: study.order_q_form,
            order_coupled: study.order_coupled,
            determinants: study.determinants,
            coarse: stats(&study.coarse),
            fine: stats(&study.fine),
        },
    )?;
    note_report(&mut run, "fine_", &study.fine);
    for (name, o) in [
        ("order_sigma_form", study.order_sigma_form),
        ("order_q_form", study.order_q_form),
        ("order_coupled", study.order_coupled),
    ] {
        run.check(name, o, (o - 2.0).abs() <= tol, &format!("2 ± {tol}"));
    }
    run.finish()
}

fn fields(a: FieldsArgs) -> Result<Outcome> {
    let mut run = Run::new("fields", &a.common)?;
    let w = weight(&mut run.params, &a.weight, "fermi")?;
    let s = positive("s", run.params.f64("s", a.s, 1.0)?)?;
    let order = run.params.usize("order", a.order, 16)?;
    let format = run.params.string("out", a.out.clone(), "csv")?;
    let grid = zs_lambda_grid(w.as_ref(), s, order)?;
    let f = solve_fields(w, s, &grid)?;
    match format.as_str() {
        "csv" => {
            let rows: Vec<Vec<String>> = (0..f.len())
                .map(|j| {
                    vec![
                        num(grid.nodes[j]),
                        num(f.phi[j].re),
                        num(f.phi[j].im),
                        num(f.psi[j].re),
                        num(f.psi[j].im),
                    ]
                })
                .collect();
            run.sink.csv(
                "fields.csv",
                &["lambda", "phi_re", "phi_im", "psi_re", "psi_im"],
                &rows,
            )?;
        }
        "json" => {
            #[derive(Serialize)]
            struct Fields<'a> {
                s: f64,
                lambda: &'a [f64],
                phi: &'a [Complex64],
                psi: &'a [Complex64],
            }
            run.sink.json(
                "fields.json",
                &Fields {
                    s,
                    lambda: &grid.nodes,
                    phi: &f.phi,
                    psi: &f.psi,
                },
            )?;
        }
        other => return Err(usage(format!("--out must be csv or json, got '{other}'"))),
    }
    run.note("yplus_residual", f.yplus_residual);
    run.finish()
}

fn verify_zs(a: VerifyZsArgs) -> Result<Outcome> {
    let mut run = Run::new("verify zs", &a.common)?;
    let w = weight(&mut run.params, &a.weight, "fermi")?;
    let s = positive("s", run.params.f64("s", a.s, 1.0)?)?;
    let h = positive("h", run.params.f64("h", a.h, 1e-2)?)?;
    let h_det = positive("h_det", run.params.f64("h_det", a.h_det, 1e-3)?)?;
    let order = run.params.usize("order", a.order, 16)?;
    let order_tol = run.params.f64("order_tol", a.order_tol, 0.3)?;
    let second_tol = run.params.f64("second_log_tol", a.second_log_tol, 1e-4)?;
    let grid = zs_lambda_grid(w.as_ref(), s + h, order)?;
    let coarse = zs_flow_residual(w.clone(), s, h, &grid)?;
    let fine = zs_flow_residual(w.clone(), s, h / 2.0, &grid)?;
    let mid = solve_fields(w, s, &grid)?;
    let second = second_log_derivative(&mid, h_det)?;
    #[derive(Serialize)]
    struct Report {
        flow_h: deformed_sine::zs::ZsFlowResidual,
        flow_h_half: deformed_sine::zs::ZsFlowResidual,
        second_log_derivative: deformed_sine::zs::SecondLogDerivative,
    }
    let report = Report {
        flow_h: coarse,
        flow_h_half: fine,
        second_log_derivative: second,
    };
    println!("{}", serde_json::to_string_pretty(&report)?);
    run.sink.json("zs_report.json", &report)?;
    run.note("flow_phi_h", coarse.phi);
    run.note("flow_phi_h_half", fine.phi);
    let o_phi = (coarse.phi / fine.phi).log2();
    let o_psi = (coarse.psi / fine.psi).log2();
    let bound = format!("2 ± {order_tol}");
    run.check("order_phi", o_phi, (o_phi - 2.0).abs() <= order_tol, &bound);
    run.check("order_psi", o_psi, (o_psi - 2.0).abs() <= order_tol, &bound);
    run.check(
        "second_log_derivative",
        second.residual,
        second.residual <= second_tol,
        &format!("≤ {second_tol}"),
    );
    run.finish()
}

fn verify_trace(a: VerifyTraceArgs) -> Result<Outcome> {
    let mut run = Run::new("verify trace", &a.common)?;
    let w = weight(&mut run.params, &a.weight, "fermi")?;
    let s_list = run
        .params
        .list("s_list", a.s_list.clone(), &[0.5, 1.0, 2.0])?;
    let order = run.params.usize("order", a.order, 16)?;
    let threshold = run.params.f64("threshold", a.threshold, 1e-6)?;
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for &s in &s_list {
        let s = positive("s", s)?;
        let grid = zs_lambda_grid(w.as_ref(), s, order)?;
        let f = solve_fields(w.clone(), s, &grid)?;
        let u = compute_u1_calibrated(&f)?;
        let r = verify_trace_identities(&f, &u)?;
        worst = worst.max(r.max());
        rows.push(vec![
            num(s),
            num(r.orthogonality),
            num(r.beta),
            num(r.gamma),
            opt(r.gamma_even),
        ]);
    }
    run.sink.csv(
        "trace.csv",
        &["s", "orthogonality", "beta", "gamma", "gamma_even"],
        &rows,
    )?;
    run.check(
        "trace_max",
        worst,
        worst <= threshold,
        &format!("≤ {threshold}"),
    );
    run.finish()
}

type ScatteringThresholds = (Option<f64>, Option<f64>, Option<f64>);

fn scattering(
    name: &str,
    a: ScatteringArgs,
    verify: Option<ScatteringThresholds>,
) -> Result<Outcome> {
    let mut run = Run::new(name, &a.common)?;
    let p = &mut run.params;
    let kind = p.string("f", a.f.clone(), "gaussian")?;
    let amp = p.f64("amp", a.amp, 1.0)?;
    let center = p.f64("center", a.center, 0.0)?;
    let (y_min, y_max) = p.range("y_range", a.y_range.clone(), (-2.0, 2.0))?;
    let hy = positive("hy", p.f64("hy", a.hy, 0.1)?)?;
    let s_seq = p.list("s_seq", a.s_seq.clone(), &[1e-2, 5e-3, 2.5e-3])?;
    let dr = positive("dr", p.f64("dr", a.dr, TableConfig::default().dr)?)?;
    let with_pde = p.bool("pde", a.pde, false)?;
    let datum = match kind.as_str() {
        "gaussian" => InitialDatum::gaussian(amp, center)?,
        "zero" => InitialDatum::Zero,
        other => return Err(usage(format!("unknown initial datum '{other}'"))),
    };
    let thresholds = match verify {
        Some((t, w0, o)) => Some((
            p.f64("threshold", t, 5e-3)?,
            p.f64("w0_tol", w0, 1e-10)?,
            p.f64("order_tol", o, 0.3)?,
        )),
        None => None,
    };
    let n = ((y_max - y_min) / hy).round() as usize;
    let y_grid: Vec<f64> = (0..=n).map(|k| y_min + hy * k as f64).collect();
    let table = TableConfig {
        y_max: y_min.abs().max(y_max.abs()),
        dr,
        ..TableConfig::default()
    };
    let pair = W_from_f(datum, &table)?;
    let mut report = roundtrip_check(&pair, &y_grid, &s_seq, &DetConfig::default())?;
    if with_pde {
        report.pde = Some(pde_check(&pair, &default_pde_patch())?);
    }
    run.sink.json("scattering.json", &report)?;
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| vec![num(r.y), num(r.f), num(r.reconstructed), num(r.abs_error)])
        .collect();
    run.sink.csv(
        "scattering.csv",
        &["y", "f", "reconstructed", "abs_error"],
        &rows,
    )?;
    run.sink.text(
        "scattering.gp",
        &curve_script(
            "scattering.csv",
            &[(4, "|reconstructed - f|")],
            "scattering.png",
            "y",
            true,
        ),
    )?;
    run.note("w_at_zero", report.w_at_zero);
    if let Some(c) = report.pde {
        run.note("pde_fine_max", c.fine_max);
    }
    match thresholds {
        None => run.note("sup_error", report.sup_error),
        Some((t, w0_tol, order_tol)) => {
            run.check(
                "sup_error",
                report.sup_error,
                report.sup_error <= t,
                &format!("≤ {t}"),
            );
            if let InitialDatum::Gaussian { amp, center: c } = datum {
                if c == 0.0 {
                    let e = (report.w_at_zero + amp * GAMMA_3_4).abs();
                    run.check("w_at_zero_error", e, e <= w0_tol, &format!("≤ {w0_tol}"));
                }
            }
            if let Some(c) = report.pde {
                let o = c.order_sigma_form;
                run.check(
                    "pde_order_sigma_form",
                    o,
                    (o - 2.0).abs() <= order_tol,
                    &format!("2 ± {order_tol}"),
                );
            }
        }
    }
    run.finish()
}

type ClassicalThresholds = (Option<f64>, Option<f64>);

fn classical(name: &str, a: ClassicalArgs, verify: Option<ClassicalThresholds>) -> Result<Outcome> {
    let mut run = Run::new(name, &a.common)?;
    let p = &mut run.params;
    let ell = p.f64("ell", a.ell, 1.0)?;
    let s_min = positive("s_min", p.f64("s_min", a.s_min, 0.1)?)?;
    let s_max = p.f64("s_max", a.s_max, 5.0)?;
    let ds = positive("ds", p.f64("ds", a.ds, 0.1)?)?;
    let tol = positive("ode_tol", p.f64("ode_tol", a.ode_tol, 1e-12)?)?;
    if s_max < s_min {
        return Err(usage("s_max must not be below s_min"));
    }
    let thresholds = match verify {
        Some((t, l)) => Some((
            p.f64("threshold", t, (10.0 * tol).max(1e-6))?,
            p.f64("log_threshold", l, 1e-6)?,
        )),
        None => None,
    };
    let n = ((s_max - s_min) / ds).round() as usize;
    let grid: Vec<f64> = (0..=n).map(|k| s_min + ds * k as f64).collect();
    let rep = compare_classical(Complex64::new(ell, 0.0), &grid, tol)?;
    let rows: Vec<Vec<String>> = rep
        .rows
        .iter()
        .map(|r| {
            vec![
                num(r.s),
                num(r.nu.re),
                num(r.nu_prime.re),
                num(r.s_dlog_f.re),
                num(r.residual1),
                num(r.residual2),
            ]
        })
        .collect();
    run.sink.csv(
        "classical.csv",
        &["s", "nu", "nu_prime", "sdslogF", "residual1", "residual2"],
        &rows,
    )?;
    run.sink.text(
        "classical.gp",
        &curve_script(
            "classical.csv",
            &[(5, "residual1"), (6, "residual2")],
            "classical.png",
            "s",
            true,
        ),
    )?;
    run.note("max_residual2", rep.max_residual2);
    run.note("ode_residual", rep.ode_residual);
    match thresholds {
        None => {
            run.note("max_residual1", rep.max_residual1);
            run.note("max_residual_log", rep.max_residual_log);
        }
        Some((t, l)) => {
            run.check(
                "max_residual1",
                rep.max_residual1,
                rep.max_residual1 <= t,
                &format!("≤ {t}"),
            );
            run.check(
                "max_residual_log",
                rep.max_residual_log,
                rep.max_residual_log <= l,
                &format!("≤ {l}"),
            );
        }
    }
    run.finish()
}

fn calibrate(a: CalibrateArgs) -> Result<Outcome> {
    let mut run = Run::new("calibrate-constants", &a.common)?;
    let patch = SurfaceConfig {
        y_min: -0.5,
        y_max: 0.5,
        h_y: 0.05,
        s_min: 0.6,
        s_max: 1.4,
        h_s: 0.02,
        order: 16,
    };
    let g = grid_args(&mut run.params, &a.grid, patch, Q_THRESHOLD)?;
    let flat = run.params.list(
        "samples",
        a.samples.clone(),
        &[-0.4, 0.7, 0.0, 1.0, 0.4, 1.3],
    )?;
    if flat.is_empty() || flat.len() % 2 != 0 {
        return Err(usage("samples must be a flat list of (y, s) pairs"));
    }
    let samples: Vec<(f64, f64)> = flat.chunks(2).map(|c| (c[0], c[1])).collect();
    let surf = build_sigma_surface(&g.profile, &g.cfg)?;
    let rep = calibrate_constants(&surf, &g.profile, &samples)?;
    run.sink.json("calibration.json", &rep)?;
    for f in &rep.fits {
        println!(
            "{:<18} c = {:+.8} {:+.2e}i  nearest {:?}  distance {:.2e}",
            f.relation, f.value.re, f.value.im, f.rational, f.distance
        );
    }
    for (key, relation) in [
        ("q_vs_gamma", "q = c·iγ"),
        ("sigma_ss_vs_gamma2", "∂ₛ²σ = c·γ²"),
    ] {
        if let Some(f) = rep.fits.iter().find(|f| f.relation == relation) {
            run.check(
                &format!("{key}_distance"),
                f.distance,
                f.rational.is_some(),
                "≤ 1e-3 from n/d, d ≤ 4",
            );
        }
    }
    run.note("p_crosscheck", rep.p_crosscheck);
    run.finish()
}
