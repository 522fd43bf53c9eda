//! JSON run configuration. Every block and field is optional; missing
//! values fall back to the reference parameters (GEV location 30, scale 3,
//! shape -0.2, unit variogram scale).

use maxrisk::dependence::{GevParams, PowerSpec};
use maxrisk::geometry::{Region, Shape};
use maxrisk::numerics::QuadSpec;
use maxrisk::simulate::BrMethod;
use maxrisk::variogram::{Sym2, Variogram};
use serde::{Deserialize, Serialize};

use crate::CliError;

fn reference_gev() -> GevParams {
    GevParams {
        location: 30.0,
        scale: 3.0,
        shape: -0.2,
    }
}

fn reference_psis() -> Vec<f64> {
    vec![0.5, 1.0, 1.5, 2.0]
}

fn unit_disk() -> Region {
    Region {
        shape: Shape::Disk,
        r: 1.0,
        lambda: 1.0,
        center: [0.0, 0.0],
    }
}

fn gev_power(beta: u32, gev: GevParams) -> Result<PowerSpec, CliError> {
    Ok(PowerSpec::gev(beta, gev)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DepSurfaceConfig {
    pub gev: GevParams,
    pub kappa: f64,
    pub psis: Vec<f64>,
    pub betas: Vec<u32>,
    /// Explicit distances; when absent each psi block uses `h_points`
    /// evenly spaced distances on `[0, kappa * 8^(2/psi)]`.
    pub h: Option<Vec<f64>>,
    pub h_points: usize,
    pub quad: QuadSpec,
}

impl Default for DepSurfaceConfig {
    fn default() -> Self {
        Self {
            gev: reference_gev(),
            kappa: 1.0,
            psis: reference_psis(),
            betas: (1..=12).collect(),
            h: None,
            h_points: 81,
            quad: QuadSpec::default(),
        }
    }
}

impl DepSurfaceConfig {
    pub fn distances(&self, psi: f64) -> Vec<f64> {
        match &self.h {
            Some(h) => h.clone(),
            None => {
                let top = self.kappa * 8f64.powf(2.0 / psi);
                let n = self.h_points.max(2);
                (0..n).map(|i| top * i as f64 / (n - 1) as f64).collect()
            }
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.quad.validate()?;
        for &psi in &self.psis {
            Variogram::power(self.kappa, psi)?;
        }
        for &b in &self.betas {
            gev_power(b, self.gev)?.check_second_moment()?;
        }
        if self.psis.is_empty() || self.betas.is_empty() {
            return Err(CliError::Config("depsurface needs psis and betas".into()));
        }
        if let Some(h) = &self.h {
            if h.iter().any(|x| !(*x >= 0.0)) {
                return Err(CliError::Config("distances must be >= 0".into()));
            }
        }
        Ok(())
    }
}

/// A log-spaced grid `min * (max/min)^(i/(points-1))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogGrid {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl LogGrid {
    pub fn values(&self) -> Vec<f64> {
        let n = self.points.max(2);
        let ratio = (self.max / self.min).ln();
        (0..n)
            .map(|i| self.min * (ratio * i as f64 / (n - 1) as f64).exp())
            .collect()
    }

    fn validate(&self) -> Result<(), CliError> {
        if self.min > 0.0 && self.max > self.min && self.points >= 2 {
            Ok(())
        } else {
            Err(CliError::Config(
                "lambda grid needs 0 < min < max and at least 2 points".into(),
            ))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct R2CurvesConfig {
    pub gev: GevParams,
    pub beta: u32,
    pub kappa: f64,
    pub psis: Vec<f64>,
    pub shapes: Vec<Shape>,
    pub r: f64,
    pub lambdas: LogGrid,
    pub quad: QuadSpec,
}

impl Default for R2CurvesConfig {
    fn default() -> Self {
        Self {
            gev: reference_gev(),
            beta: 1,
            kappa: 1.0,
            psis: reference_psis(),
            shapes: vec![Shape::Disk, Shape::Square],
            r: 1.0,
            lambdas: LogGrid {
                min: 1e-3,
                max: 100.0,
                points: 41,
            },
            quad: QuadSpec::default(),
        }
    }
}

impl R2CurvesConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        self.quad.validate()?;
        self.lambdas.validate()?;
        gev_power(self.beta, self.gev)?.check_second_moment()?;
        for &psi in &self.psis {
            Variogram::power(self.kappa, psi)?;
        }
        for &s in &self.shapes {
            Region::new(s, self.r, 1.0)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RiskReportConfig {
    pub gev: GevParams,
    pub beta: u32,
    pub variogram: Variogram,
    pub regions: Vec<Region>,
    pub lambdas: Vec<f64>,
    pub alphas: Vec<f64>,
    pub quad: QuadSpec,
}

impl Default for RiskReportConfig {
    fn default() -> Self {
        Self {
            gev: reference_gev(),
            beta: 1,
            variogram: Variogram::power(1.0, 1.0).expect("valid reference variogram"),
            regions: vec![
                unit_disk(),
                Region {
                    shape: Shape::Square,
                    ..unit_disk()
                },
            ],
            lambdas: vec![10.0, 20.0, 25.0, 50.0, 100.0],
            alphas: vec![0.5, 0.95, 0.99],
            quad: QuadSpec::default(),
        }
    }
}

impl RiskReportConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        self.quad.validate()?;
        gev_power(self.beta, self.gev)?.check_second_moment()?;
        for r in &self.regions {
            r.validate()?;
        }
        if self.lambdas.iter().any(|l| !(*l > 0.0)) {
            return Err(CliError::Config("lambdas must be positive".into()));
        }
        if self.alphas.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
            return Err(CliError::Config("alphas must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum Generator {
    BrownResnick {
        variogram: Variogram,
        method: BrMethod,
    },
    Smith {
        sigma: Sym2,
    },
    Tube {
        radius: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub generator: Generator,
    pub region: Region,
    pub lambda: f64,
    /// Grid cells across the dilated region's diameter.
    pub cells_across: usize,
    pub n_rep: usize,
    pub seed: u64,
    /// GEV margins for the cost; simple margins when absent.
    pub gev: Option<GevParams>,
    pub beta: f64,
    pub alphas: Vec<f64>,
    /// Write the simulated fields next to the summary (`.bin`).
    pub dump: bool,
    pub quad: QuadSpec,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            generator: Generator::BrownResnick {
                variogram: Variogram::power(1.0, 2.0).expect("valid reference variogram"),
                method: BrMethod::ExtremalFunctions,
            },
            region: unit_disk(),
            lambda: 10.0,
            cells_across: 50,
            n_rep: 200,
            seed: 1,
            gev: Some(reference_gev()),
            beta: 1.0,
            alphas: vec![0.95],
            dump: true,
            quad: QuadSpec::default(),
        }
    }
}

impl SimulateConfig {
    pub fn power(&self) -> Result<PowerSpec, CliError> {
        match self.gev {
            Some(g) => {
                if self.beta < 0.0 || self.beta != self.beta.round() {
                    return Err(CliError::Config("GEV costs need an integer beta".into()));
                }
                gev_power(self.beta as u32, g)
            }
            None => Ok(PowerSpec::simple(self.beta)?),
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.quad.validate()?;
        self.region.validate()?;
        self.power()?.validate()?;
        if !(self.lambda > 0.0) || self.cells_across == 0 || self.n_rep == 0 {
            return Err(CliError::Config(
                "lambda, cells_across and n_rep must be positive".into(),
            ));
        }
        if self.alphas.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
            return Err(CliError::Config("alphas must lie in (0, 1)".into()));
        }
        match &self.generator {
            Generator::Smith { sigma } => sigma.validate()?,
            Generator::Tube { radius } if !(*radius > 0.0) => {
                return Err(CliError::Config("tube radius must be positive".into()))
            }
            _ => {}
        }
        Ok(())
    }
}

/// The whole configuration document: one block per command.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub depsurface: DepSurfaceConfig,
    pub r2curves: R2CurvesConfig,
    pub riskreport: RiskReportConfig,
    pub simulate: SimulateConfig,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text)
            .map_err(|e| CliError::Config(format!("line {}, column {}: {e}", e.line(), e.column())))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}
