//! One function per subcommand; each returns a [`Report`].

use anyhow::{bail, Context, Result};
use microtwin::deformation::{
    microtwin_configuration, quadratic, sample_configuration, two_slope, DiscreteProfile, MicrotwinConfig,
    PiecewiseDeformation,
};
use microtwin::discretization::{epsilon_term, fit_expansion_params, lattice_window, ExpansionParams};
use microtwin::energy::{atomistic_energy, energy_difference};
use microtwin::expansion::{
    jump_curvature_root, k_terms, lj_jump_threshold, one_jump_coefficients, smooth_coefficients,
    taylor_residual_decays, InterfaceData, TaylorRow,
};
use microtwin::potential::PotentialSpec;
use microtwin::profile::{a_sigma, critical_a, g_function, minimize_f_m, ProfileChain};
use microtwin::series::{invert_t0, invert_t0_neumann, single_sum, zeta_inverse, T0Image};
use microtwin::{LennardJones, Potential};
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::output::{format_g, Report};

const PUBLISHED_AM: &[(usize, f64)] = &[
    (2, 1.24362),
    (3, 1.24280),
    (4, 1.24226),
    (5, 1.24192),
    (6, 1.24169),
    (7, 1.24153),
    (8, 1.24142),
    (9, 1.24133),
    (10, 1.24127),
    (11, 1.24122),
    (13, 1.24115),
    (15, 1.24111),
    (17, 1.24107),
    (19, 1.24105),
];

const PUBLISHED_SG: &[(usize, f64)] = &[
    (2, -0.0570514),
    (3, -0.0657517),
    (4, -0.0470596),
    (5, -0.0453827),
    (6, -0.0452401),
    (7, -0.0452798),
    (8, -0.0453306),
    (9, -0.0453703),
    (10, -0.0453990),
    (11, -0.0454194),
    (12, -0.0454342),
    (13, -0.0454451),
    (14, -0.0454533),
    (15, -0.0454594),
    (20, -0.0454752),
    (25, -0.0454809),
    (30, -0.0454834),
    (40, -0.0454854),
    (50, -0.0454861),
];

const AM_TOL: f64 = 1e-4;
const SG_TOL: f64 = 1e-6;
const MAX_M: usize = 50;

/// Flags and file values after merging.
pub struct Settings {
    pub tol: Option<f64>,
    pub m: Option<Vec<usize>>,
    pub sigma: Option<f64>,
    pub config: RunConfig,
}

impl Settings {
    fn sigma(&self) -> f64 {
        self.sigma
            .or(self.config.sigma)
            .or(self.config.potential.as_ref().map(|p| p.sigma))
            .unwrap_or(1.0)
    }

    fn potential(&self) -> Result<LennardJones> {
        let mut spec = self.config.potential.clone().unwrap_or_default();
        spec.sigma = self.sigma();
        Ok(PotentialSpec::build(&spec)?)
    }

    fn tol(&self, default: f64) -> Result<f64> {
        let t = self.tol.or(self.config.tol).unwrap_or(default);
        if !(t > 0.0 && t.is_finite()) {
            bail!("tolerance must be positive, got {t}");
        }
        Ok(t)
    }

    fn m_list(&self, default: &[usize]) -> Result<Vec<usize>> {
        let list = self.m.clone().or_else(|| self.config.m.clone()).unwrap_or_else(|| default.to_vec());
        if list.is_empty() {
            bail!("empty m list");
        }
        if let Some(bad) = list.iter().find(|m| !(2..=MAX_M).contains(*m)) {
            bail!("m = {bad} outside 2..={MAX_M}");
        }
        Ok(list)
    }

    fn params(&self) -> Result<ExpansionParams> {
        let p = self.config.params.unwrap_or_default();
        Ok(ExpansionParams::symmetric(p.a1, p.a2)?)
    }
}

fn lookup(table: &[(usize, f64)], m: usize) -> Option<f64> {
    table.iter().find(|(k, _)| *k == m).map(|(_, v)| *v)
}

pub fn am_table(s: &Settings) -> Result<Report> {
    let tol = s.tol(1e-5)?;
    let ms = s.m_list(&PUBLISHED_AM.iter().map(|(m, _)| *m).collect::<Vec<_>>())?;
    let pot = s.potential()?;
    let sigma = pot.sigma();
    let values = ms
        .par_iter()
        .map(|&m| critical_a(m, &pot, tol).map(|a| (m, a / sigma)).with_context(|| format!("a_m for m = {m}")))
        .collect::<Result<Vec<_>>>()?;
    let mut r = Report::new("am-table", &["m", "a_m", "published"]);
    let mut worst: Option<f64> = None;
    for &(m, a) in &values {
        let published = lookup(PUBLISHED_AM, m);
        if let Some(p) = published {
            worst = Some(worst.unwrap_or(0.0).max((a - p).abs()));
        }
        r.push(vec![m.into(), a.into(), published.into()]);
    }
    if let Some(w) = worst {
        r.check("table", w < AM_TOL, format!("max deviation from the published a_m {} (< {AM_TOL:e})", format_g(w, 3)));
    }
    let mut sorted = values.clone();
    sorted.sort_by_key(|(m, _)| *m);
    let decreasing = sorted.windows(2).all(|w| w[0].0 == w[1].0 || w[1].1 < w[0].1);
    r.check("monotone", decreasing, "a_m decreases strictly with m");
    Ok(r)
}

pub fn g_table(s: &Settings) -> Result<Report> {
    let tol = s.tol(1e-12)?;
    let ms = s.m_list(&PUBLISHED_SG.iter().map(|(m, _)| *m).collect::<Vec<_>>())?;
    let sigma = s.sigma();
    let a = a_sigma(sigma);
    let values = ms
        .par_iter()
        .map(|&m| {
            g_function(a, sigma, m, tol / sigma)
                .map(|g| (m, sigma * g.value))
                .with_context(|| format!("G for m = {m}"))
        })
        .collect::<Result<Vec<_>>>()?;
    // smallest |σG|; ties go to the smaller m
    let optimal = values
        .iter()
        .min_by(|x, y| x.1.abs().total_cmp(&y.1.abs()).then(x.0.cmp(&y.0)))
        .map(|(m, _)| *m);
    let mut r = Report::new("g-table", &["m", "sigma_G", "published", "optimal"]);
    let mut worst: Option<f64> = None;
    for &(m, g) in &values {
        let published = lookup(PUBLISHED_SG, m);
        if let Some(p) = published {
            worst = Some(worst.unwrap_or(0.0).max((g - p).abs()));
        }
        let mark = if Some(m) == optimal { "*" } else { "" };
        r.push(vec![m.into(), g.into(), published.into(), mark.into()]);
    }
    if let Some(w) = worst {
        r.check("table", w < SG_TOL, format!("max deviation from the published sigma*G {} (< {SG_TOL:e})", format_g(w, 3)));
    }
    Ok(r)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum TaylorMode {
    Smooth,
    OneJump,
    Microtwin,
}

const DEFAULT_N: [usize; 5] = [39, 78, 156, 312, 624];

fn default_deformation(mode: TaylorMode) -> Result<PiecewiseDeformation> {
    Ok(match mode {
        TaylorMode::Smooth => quadratic(-1.0, 1.0, 1.0, 0.05)?,
        TaylorMode::OneJump | TaylorMode::Microtwin => two_slope(1.0, 0.06, 1.2, -0.08)?,
    })
}

fn ratio_text(rows: &[TaylorRow]) -> String {
    rows.windows(2)
        .map(|w| format_g(w[0].scaled_residual / w[1].scaled_residual, 4))
        .collect::<Vec<_>>()
        .join(", ")
}

pub fn taylor_verify(s: &Settings, mode: TaylorMode) -> Result<Report> {
    // the residuals of interest sit near 1e-12, so the default is tighter than elsewhere
    let tol = s.tol(1e-13)?;
    let pot = s.potential()?;
    let params = s.params()?;
    let u = match &s.config.deformation {
        Some(spec) => spec.build()?,
        None => default_deformation(mode)?,
    };
    if u.start() != -1.0 || u.end() != 1.0 {
        bail!("taylor-verify works on [-1, 1]; the deformation lives on [{}, {}]", u.start(), u.end());
    }
    let ns = s.config.taylor.n.clone().unwrap_or_else(|| DEFAULT_N.to_vec());
    if ns.len() < 3 || ns.windows(2).any(|w| w[1] <= w[0]) {
        bail!("need at least three increasing sequence indices n");
    }

    let mut r = Report::new("taylor-verify", &["n", "eps", "energy", "predicted", "residual", "residual_over_eps2"]);

    // the declared (a1, a2) must describe the sequence actually used
    let windows = (0..8)
        .map(|k| {
            let n = 50usize << k;
            let eps = epsilon_term(params.a1, params.a2, n).context("sequence term undefined")?;
            Ok(lattice_window(-1.0, 1.0, 0.0, eps)?)
        })
        .collect::<Result<Vec<_>>>()?;
    let fitted = fit_expansion_params(&windows)?;
    let dev = (fitted.params.a1 - params.a1).abs().max((fitted.params.a2 - params.a2).abs());
    r.check("sequence", dev < 1e-6, format!("fitted (a1, a2) within {} of the declared values", format_g(dev, 3)));

    let eps_list = ns
        .iter()
        .map(|&n| epsilon_term(params.a1, params.a2, n).with_context(|| format!("eps_{n} undefined")))
        .collect::<Result<Vec<_>>>()?;

    let rows: Vec<TaylorRow> = match mode {
        TaylorMode::Smooth => {
            let c = smooth_coefficients(&u, &pot, &params, -1.0, 1.0, tol)?;
            eps_list
                .iter()
                .map(|&eps| {
                    let w = lattice_window(-1.0, 1.0, 0.0, eps)?;
                    let e = atomistic_energy(&sample_configuration(&u, &w)?, &pot)?;
                    Ok(TaylorRow::new(eps, e, c.predict(eps)))
                })
                .collect::<Result<_>>()?
        }
        TaylorMode::OneJump => {
            let c = one_jump_coefficients(&u, &pot, &params, tol)?;
            eps_list
                .iter()
                .map(|&eps| {
                    let w = lattice_window(-1.0, 1.0, 0.0, eps)?;
                    let e = atomistic_energy(&sample_configuration(&u, &w)?, &pot)?;
                    Ok(TaylorRow::new(eps, e, c.predict(eps)))
                })
                .collect::<Result<_>>()?
        }
        TaylorMode::Microtwin => {
            let profile = match (&s.config.taylor.twin_profile, s.m.as_deref().or(s.config.m.as_deref())) {
                (Some(y), _) => DiscreteProfile::new(y.len() + 1, y.clone())?,
                (None, Some([m])) => DiscreteProfile::equispaced(*m)?,
                (None, Some(_)) => bail!("microtwin mode takes a single --m"),
                (None, None) => DiscreteProfile::new(3, vec![0.3, 0.7])?,
            };
            let c = one_jump_coefficients(&u, &pot, &params, tol)?;
            let k = k_terms(&InterfaceData::at_zero(&u)?, &profile, &pot, params.a1, tol)?;
            let mut full = Vec::new();
            let mut diff = Vec::new();
            for &eps in &eps_list {
                let cfg = MicrotwinConfig::new(u.clone(), profile.clone(), eps)?;
                let twin = microtwin_configuration(&cfg)?;
                let base = sample_configuration(&u, &cfg.window()?)?;
                let e = atomistic_energy(&twin, &pot)?;
                let d = energy_difference(&twin, &base, &pot)?;
                let kk = eps * k.k1 + eps * eps * k.k2;
                full.push(TaylorRow::new(eps, e, c.predict(eps) + kk));
                diff.push(TaylorRow::new(eps, d, kk));
            }
            r.check(
                "interaction",
                taylor_residual_decays(&diff),
                format!(
                    "E(u_eps) - E(u) against eps*K1 + eps^2*K2 (K1 = {}, K2 = {}): ratios {}",
                    format_g(k.k1, 8),
                    format_g(k.k2, 8),
                    ratio_text(&diff)
                ),
            );
            full
        }
    };
    for (n, row) in ns.iter().zip(&rows) {
        r.push(vec![
            (*n).into(),
            row.eps.into(),
            row.energy.into(),
            row.predicted.into(),
            row.residual.into(),
            row.scaled_residual.into(),
        ]);
    }
    r.check(
        "residual",
        taylor_residual_decays(&rows),
        format!("residual/eps^2 ratios per step {} (need >= 1.5 per halving over the last three points)", ratio_text(&rows)),
    );
    Ok(r)
}

fn bisect(f: impl Fn(f64) -> Result<f64>, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    let lo_sign = f(lo)? < 0.0;
    if (f(hi)? < 0.0) == lo_sign {
        bail!("no sign change in [{lo}, {hi}]");
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if (f(mid)? < 0.0) == lo_sign {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

pub fn constants(s: &Settings) -> Result<Report> {
    let tol = s.tol(1e-12)?;
    let pot = LennardJones::new(1.0)?;
    let rho = zeta_inverse(2.0)?;
    let well = bisect(|t| Ok(pot.derivative(1, t)), 1.0, 1.5, tol)?;
    let elastic = bisect(|t| Ok(single_sum(&pot, 1, 1, t, 1e-15)?.value), 1.0, 1.3, tol)?;
    let threshold = jump_curvature_root(&pot, 0.5, 0.7, tol)?;
    let rows: [(&str, f64, f64, f64); 5] = [
        ("zeta_inverse(2)", rho, 1.72865, 1e-5),
        ("lj_well (units of sigma)", well, 1.12246, 1e-5),
        ("elastic_minimizer (units of sigma)", elastic, 1.1193, 1e-4),
        ("jump_curvature_threshold (bisection)", threshold, 0.603431, 1e-5),
        ("jump_curvature_threshold (zeta closed form)", lj_jump_threshold(), 0.603431, 1e-5),
    ];
    let mut r = Report::new("constants", &["name", "computed", "published", "difference"]);
    for (name, v, published, tolerance) in rows {
        r.push(vec![name.into(), v.into(), published.into(), (v - published).into()]);
        r.check(name, (v - published).abs() < tolerance, format!("{} vs {published} (tolerance {tolerance:e})", format_g(v, 12)));
    }
    Ok(r)
}

pub fn profile_min(s: &Settings, a: Option<f64>, b: Option<f64>, starts: Option<usize>) -> Result<Report> {
    let tol = s.tol(1e-9)?;
    let ms = s.m_list(&[2, 3, 4, 5])?;
    let pot = s.potential()?;
    let default_slope = a_sigma(pot.sigma());
    let a = a.or(s.config.profile.a).unwrap_or(default_slope);
    let b = b.or(s.config.profile.b).unwrap_or(a);
    let starts = starts.or(s.config.profile.starts).unwrap_or(9);
    let results = ms
        .par_iter()
        .map(|&m| minimize_f_m(a, b, m, &pot, tol, starts).with_context(|| format!("minimising F_{m}")))
        .collect::<Result<Vec<_>>>()?;
    let mut r = Report::new("profile-min", &["m", "a", "b", "value", "gradient_norm", "distance_to_qm", "chain"]);
    for (m, res) in ms.iter().zip(&results) {
        let q = ProfileChain::equispaced(*m)?;
        let dist = res.chain.values().iter().zip(q.values()).fold(0.0f64, |d, (x, y)| d.max((x - y).abs()));
        let chain = res.chain.values().iter().map(|x| format_g(*x, 12)).collect::<Vec<_>>().join(";");
        r.push(vec![(*m).into(), a.into(), b.into(), res.value.into(), res.gradient_norm.into(), dist.into(), chain.into()]);
        r.check(
            format!("m={m}"),
            res.gradient_norm < tol,
            format!("gradient norm {} (< {tol:e})", format_g(res.gradient_norm, 3)),
        );
    }
    Ok(r)
}

pub fn invert_potential(s: &Settings) -> Result<Report> {
    let tol = s.tol(1e-14)?;
    let pot = s.potential()?;
    let sigma = pot.sigma();
    let inv = &s.config.invert;
    let (t_min, t_max) = (inv.t_min.unwrap_or(0.8 * sigma), inv.t_max.unwrap_or(5.0 * sigma));
    let points = inv.points.unwrap_or(200);
    if !(t_min > 0.0 && t_max > t_min) || points < 2 {
        bail!("need 0 < t_min < t_max and at least 2 points");
    }
    let image = T0Image::new(pot.clone(), tol * 1e-2)?;
    let rows = (0..points)
        .into_par_iter()
        .map(|k| {
            let t = t_min + (t_max - t_min) * k as f64 / (points - 1) as f64;
            let w = pot.value(t);
            let g = image.eval(0, t)?.value;
            let mobius = invert_t0(&image, t, tol)?.value;
            let neumann = invert_t0_neumann(&image, t, tol)?.map(|r| r.value);
            Ok((t, w, g, mobius, neumann))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut r = Report::new("invert-potential", &["t", "W", "T0W", "mobius", "neumann", "relative_error"]);
    let (mut worst, mut worst_agree) = (0.0f64, 0.0f64);
    for &(t, w, g, m, n) in &rows {
        let rel = (m - w).abs() / w.abs();
        worst = worst.max(rel);
        if let Some(n) = n {
            worst_agree = worst_agree.max((n - m).abs() / m.abs());
        }
        r.push(vec![t.into(), w.into(), g.into(), m.into(), n.into(), rel.into()]);
    }
    r.check("roundtrip", worst < 1e-8, format!("max relative error {} (< 1e-8)", format_g(worst, 3)));
    r.check("agreement", worst_agree < 1e-8, format!("Mobius vs Neumann {} (< 1e-8)", format_g(worst_agree, 3)));
    Ok(r)
}

pub fn jump_threshold(s: &Settings) -> Result<Report> {
    let tol = s.tol(1e-12)?;
    let pot = s.potential()?;
    let sigma = pot.sigma();
    let bisection = jump_curvature_root(&pot, 0.5 * sigma, 0.7 * sigma, tol * sigma)? / sigma;
    let closed = lj_jump_threshold();
    let mut r = Report::new("jump-threshold", &["method", "threshold", "published"]);
    let published = 0.603431;
    for (name, v) in [("bisection", bisection), ("zeta closed form", closed)] {
        r.push(vec![name.into(), v.into(), published.into()]);
        r.check(name, (v - published).abs() < 1e-5, format!("{} (units of sigma) vs {published}", format_g(v, 12)));
    }
    Ok(r)
}
