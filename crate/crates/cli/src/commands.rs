use std::path::{Path, PathBuf};

use maxrisk::dependence::{CovKernel, PowerSpec};
use maxrisk::geometry::{Region, Shape};
use maxrisk::risk::{clt_approx, es_asymptotic, mean_cost, r2, var_asymptotic, RiskQuery};
use maxrisk::simulate::{
    gev_transform, mc_normalized_loss_with, mc_risk, simulate_brown_resnick, simulate_smith,
    simulate_tube, write_samples, FieldSample, Grid, LossOptions, RiskMeasure, Sites,
};
use maxrisk::variogram::Variogram;
use rayon::prelude::*;

use crate::config::{
    DepSurfaceConfig, Generator, R2CurvesConfig, RiskReportConfig, SimulateConfig,
};
use crate::csv::{Cell, Table};
use crate::CliError;

fn shape_name(s: Shape) -> &'static str {
    match s {
        Shape::Disk => "disk",
        Shape::Square => "square",
    }
}

/// Rows `(psi, h, beta, D)`, one block per psi.
pub fn depsurface(cfg: &DepSurfaceConfig) -> Result<String, CliError> {
    cfg.validate()?;
    let mut cells = Vec::new();
    for &psi in &cfg.psis {
        for h in cfg.distances(psi) {
            for &beta in &cfg.betas {
                cells.push((psi, h, beta));
            }
        }
    }
    let kernels = cfg
        .betas
        .iter()
        .map(|&b| {
            let p = PowerSpec::gev(b, cfg.gev)?;
            let k = CovKernel::new(&p, &p)?;
            let var = k.cov_radial(0.0, &cfg.quad)?;
            Ok((b, k, var))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let values = cells
        .par_iter()
        .map(|&(psi, h, beta)| {
            let (_, k, var) = kernels
                .iter()
                .find(|(b, _, _)| *b == beta)
                .expect("kernel for every beta");
            let v = Variogram::power(cfg.kappa, psi)?;
            let hr = v.eval([h, 0.0]).sqrt();
            Ok(k.cov_radial(hr, &cfg.quad)? / var)
        })
        .collect::<Result<Vec<f64>, CliError>>()?;
    let mut t = Table::new(&["psi", "h", "beta", "D"]);
    for (&(psi, h, beta), &d) in cells.iter().zip(&values) {
        t.row(&[psi.into(), h.into(), f64::from(beta).into(), d.into()]);
    }
    Ok(t.into_string())
}

/// Rows `(shape, psi, lambda, R2)` over a log-spaced lambda grid.
pub fn r2curves(cfg: &R2CurvesConfig) -> Result<String, CliError> {
    cfg.validate()?;
    let power = PowerSpec::gev(cfg.beta, cfg.gev)?;
    let lambdas = cfg.lambdas.values();
    let mut cells = Vec::new();
    for &shape in &cfg.shapes {
        for &psi in &cfg.psis {
            for &l in &lambdas {
                cells.push((shape, psi, l));
            }
        }
    }
    let values = cells
        .par_iter()
        .map(|&(shape, psi, l)| {
            let q = RiskQuery::new(
                Region::new(shape, cfg.r, 1.0)?,
                power,
                Variogram::power(cfg.kappa, psi)?,
            )
            .with_quad(cfg.quad.clone());
            Ok(r2(&q, l)?)
        })
        .collect::<Result<Vec<f64>, CliError>>()?;
    let mut t = Table::new(&["shape", "psi", "lambda", "R2"]);
    for (&(shape, psi, l), &v) in cells.iter().zip(&values) {
        t.row(&[shape_name(shape).into(), psi.into(), l.into(), v.into()]);
    }
    Ok(t.into_string())
}

/// Rows `(shape, r, lambda, alpha, mean, clt_sd, var_asym, es_asym)`.
pub fn riskreport(cfg: &RiskReportConfig) -> Result<String, CliError> {
    cfg.validate()?;
    let power = PowerSpec::gev(cfg.beta, cfg.gev)?;
    let mut t = Table::new(&[
        "shape", "r", "lambda", "alpha", "mean", "clt_sd", "var_asym", "es_asym",
    ]);
    for region in &cfg.regions {
        let base = RiskQuery::new(*region, power, cfg.variogram).with_quad(cfg.quad.clone());
        for &l in &cfg.lambdas {
            let clt = clt_approx(&base, l)?;
            for &alpha in &cfg.alphas {
                let q = base.clone().with_alpha(alpha);
                let var = var_asymptotic(&q, l)?;
                let es = es_asymptotic(&q, l)?;
                t.row(&[
                    shape_name(region.shape).into(),
                    region.r.into(),
                    l.into(),
                    alpha.into(),
                    clt.mean.into(),
                    clt.sd().into(),
                    var.value.into(),
                    es.value.into(),
                ]);
            }
        }
    }
    Ok(t.into_string())
}

/// Result of the simulate command: the summary CSV and the raw fields.
pub struct SimulateOutput {
    pub summary: String,
    pub samples: Vec<FieldSample>,
}

pub fn simulate(cfg: &SimulateConfig) -> Result<SimulateOutput, CliError> {
    cfg.validate()?;
    let power = cfg.power()?;
    let region = cfg.region.scaled(cfg.lambda);
    let grid = Grid::covering(&region, cfg.cells_across)?;
    let sites = Sites::within(grid, &region)?;
    let simple = match &cfg.generator {
        Generator::BrownResnick { variogram, method } => {
            simulate_brown_resnick(variogram, sites, cfg.n_rep, cfg.seed, *method)?
        }
        Generator::Smith { sigma } => simulate_smith(sigma, sites, cfg.n_rep, cfg.seed)?,
        Generator::Tube { radius } => simulate_tube(*radius, sites, cfg.n_rep, cfg.seed)?,
    };
    let samples = match cfg.gev {
        Some(g) => simple
            .iter()
            .map(|s| gev_transform(s, &g))
            .collect::<Result<Vec<_>, _>>()?,
        None => simple,
    };
    let opts = LossOptions {
        min_cells_across: cfg.cells_across as f64,
    };
    let losses = mc_normalized_loss_with(&samples, &cfg.region, cfg.lambda, cfg.beta, &opts)?;

    let mut t = Table::new(&["statistic", "alpha", "estimate", "std_error", "analytic"]);
    let analytic_mean = mean_cost(&power).ok();
    let analytic_var = match &cfg.generator {
        Generator::BrownResnick { variogram, .. } if variogram.is_isotropic() => {
            let q = RiskQuery::new(cfg.region, power, *variogram).with_quad(cfg.quad.clone());
            r2(&q, cfg.lambda).ok()
        }
        _ => None,
    };
    let nan = f64::NAN;
    let m = mc_risk(&losses, RiskMeasure::Mean)?;
    t.row(&[
        "mean".into(),
        nan.into(),
        m.estimate.into(),
        m.std_error.into(),
        analytic_mean.unwrap_or(nan).into(),
    ]);
    let v = mc_risk(&losses, RiskMeasure::Variance)?;
    t.row(&[
        "variance".into(),
        nan.into(),
        v.estimate.into(),
        v.std_error.into(),
        analytic_var.unwrap_or(nan).into(),
    ]);
    for &alpha in &cfg.alphas {
        for (name, measure) in [
            ("var", RiskMeasure::Var(alpha)),
            ("es", RiskMeasure::Es(alpha)),
        ] {
            let e = mc_risk(&losses, measure)?;
            if let Some(w) = &e.warning {
                eprintln!("warning: {name} at {alpha}: {w}");
            }
            t.row(&[
                Cell::from(name),
                alpha.into(),
                e.estimate.into(),
                e.std_error.into(),
                nan.into(),
            ]);
        }
    }
    Ok(SimulateOutput {
        summary: t.into_string(),
        samples,
    })
}

/// Path of the binary dump written next to a summary file.
pub fn dump_path(out: &Path) -> PathBuf {
    out.with_extension("bin")
}

pub fn write_dump(path: &Path, samples: &[FieldSample]) -> Result<(), CliError> {
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_samples(file, samples)?;
    Ok(())
}
