use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    SingleCharge,
    Reset,
    EtaSweep,
    Dissipation,
    Collisions,
    ValidateDispersive,
    AppendixChecks,
}

impl Experiment {
    pub fn id(self) -> &'static str {
        match self {
            Experiment::SingleCharge => "single-charge",
            Experiment::Reset => "reset",
            Experiment::EtaSweep => "eta-sweep",
            Experiment::Dissipation => "dissipation",
            Experiment::Collisions => "collisions",
            Experiment::ValidateDispersive => "validate-dispersive",
            Experiment::AppendixChecks => "appendix-checks",
        }
    }
}

/// Initial state of the mode that carries the energy input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChargerKind {
    /// `|n_added⟩`, partner mode in vacuum.
    Fock,
    Spats,
    Npats,
    Dts,
    /// `η·SPATS + (1 − η)·Gibbs`.
    Mixture,
    Thermal,
}

impl ChargerKind {
    pub fn id(self) -> &'static str {
        match self {
            ChargerKind::Fock => "fock",
            ChargerKind::Spats => "spats",
            ChargerKind::Npats => "npats",
            ChargerKind::Dts => "dts",
            ChargerKind::Mixture => "mixture",
            ChargerKind::Thermal => "thermal",
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChargeSection {
    pub charger: ChargerKind,
    pub n_added: usize,
    /// Displacement amplitude; defaults to α_opt(n_added).
    pub alpha: Option<f64>,
    pub eta: f64,
    /// Ground population of the battery; defaults to the thermal value.
    pub qubit_pg: Option<f64>,
    pub m_drive: i64,
    pub n_drive: i64,
    /// Time window in units of 1/λ_eff.
    pub horizon: f64,
    pub points: usize,
}

impl Default for ChargeSection {
    fn default() -> Self {
        ChargeSection {
            charger: ChargerKind::Fock,
            n_added: 1,
            alpha: None,
            eta: 1.0,
            qubit_pg: None,
            m_drive: 0,
            n_drive: -1,
            horizon: 2.0 * std::f64::consts::PI,
            points: 201,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct EtaSweepSection {
    pub tbars: Vec<f64>,
    pub points: usize,
}

impl Default for EtaSweepSection {
    fn default() -> Self {
        EtaSweepSection {
            tbars: vec![0.05, 0.1],
            points: 101,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct DissipationSection {
    pub charger: ChargerKind,
    /// γ₀ values in units of λ_eff.
    pub gammas: Vec<f64>,
    pub cutoff: usize,
    pub horizon: f64,
    pub points: usize,
    pub include_eg: bool,
}

impl Default for DissipationSection {
    fn default() -> Self {
        DissipationSection {
            charger: ChargerKind::Spats,
            gammas: vec![0.01, 0.05, 0.1],
            cutoff: 12,
            horizon: std::f64::consts::PI,
            points: 61,
            include_eg: false,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct CollisionsSection {
    pub k: usize,
    pub charger: ChargerKind,
    pub n_added: usize,
    pub alpha: Option<f64>,
}

impl Default for CollisionsSection {
    fn default() -> Self {
        CollisionsSection {
            k: 30,
            charger: ChargerKind::Dts,
            n_added: 1,
            alpha: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct DispersiveSection {
    pub ratios: Vec<f64>,
    pub cutoff: usize,
    pub points: usize,
}

impl Default for DispersiveSection {
    fn default() -> Self {
        DispersiveSection {
            ratios: vec![10.0, 30.0, 50.0, 100.0],
            cutoff: 6,
            points: 201,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct AppendixSection {
    pub profiles: usize,
    pub states: usize,
}

impl Default for AppendixSection {
    fn default() -> Self {
        AppendixSection {
            profiles: 50,
            states: 20,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub tbar: f64,
    pub chi: f64,
    /// Δ / max(Ω_L, Ω_R); fixes the mode frequencies and the full-model couplings.
    pub dispersive_ratio: f64,
    pub cutoff_left: usize,
    pub cutoff_right: usize,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub single_charge: ChargeSection,
    pub reset: ChargeSection,
    pub eta_sweep: EtaSweepSection,
    pub dissipation: DissipationSection,
    pub collisions: CollisionsSection,
    pub validate_dispersive: DispersiveSection,
    pub appendix_checks: AppendixSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: Experiment::SingleCharge,
            tbar: 0.1,
            chi: 1.0,
            dispersive_ratio: 50.0,
            cutoff_left: 36,
            cutoff_right: 25,
            seed: 0,
            output: None,
            single_charge: ChargeSection::default(),
            reset: ChargeSection::default(),
            eta_sweep: EtaSweepSection::default(),
            dissipation: DissipationSection::default(),
            collisions: CollisionsSection::default(),
            validate_dispersive: DispersiveSection::default(),
            appendix_checks: AppendixSection::default(),
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if !(v.is_finite() && v > 0.0) {
        bail!("{name} must be finite and > 0, got {v}");
    }
    Ok(())
}

fn probability(name: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        bail!("{name} must lie in [0, 1], got {v}");
    }
    Ok(())
}

fn grid(name: &str, horizon: f64, points: usize) -> Result<()> {
    positive(&format!("{name}.horizon"), horizon)?;
    if points < 2 {
        bail!("{name}.points must be at least 2, got {points}");
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        positive("tbar", self.tbar)?;
        positive("chi", self.chi)?;
        if !(self.dispersive_ratio.is_finite() && self.dispersive_ratio >= 1.0) {
            bail!(
                "dispersive_ratio must be >= 1, got {}",
                self.dispersive_ratio
            );
        }
        if self.cutoff_left < 2 || self.cutoff_right < 2 {
            bail!("cutoffs must be at least 2");
        }
        for (name, s) in [
            ("single_charge", &self.single_charge),
            ("reset", &self.reset),
        ] {
            probability(&format!("{name}.eta"), s.eta)?;
            if let Some(p) = s.qubit_pg {
                probability(&format!("{name}.qubit_pg"), p)?;
            }
            if let Some(a) = s.alpha {
                if !a.is_finite() || a < 0.0 {
                    bail!("{name}.alpha must be finite and >= 0, got {a}");
                }
            }
            grid(name, s.horizon, s.points)?;
        }
        for &t in &self.eta_sweep.tbars {
            positive("eta_sweep.tbars", t)?;
        }
        if self.eta_sweep.points < 2 {
            bail!("eta_sweep.points must be at least 2");
        }
        let d = &self.dissipation;
        if d.gammas.iter().any(|g| !g.is_finite() || *g < 0.0) {
            bail!("dissipation.gammas must be finite and >= 0");
        }
        if d.cutoff < 2 {
            bail!("dissipation.cutoff must be at least 2");
        }
        grid("dissipation", d.horizon, d.points)?;
        if self.collisions.k == 0 {
            bail!("collisions.k must be at least 1");
        }
        for &r in &self.validate_dispersive.ratios {
            if !(r.is_finite() && r >= 1.0) {
                bail!("validate_dispersive.ratios must be >= 1, got {r}");
            }
        }
        if self.validate_dispersive.cutoff < 2 || self.validate_dispersive.points < 2 {
            bail!("validate_dispersive.cutoff and points must be at least 2");
        }
        Ok(())
    }

    /// Flattened `key=value` echo of every setting.
    pub fn echo(&self) -> Vec<(String, String)> {
        let value = toml::Value::try_from(self).expect("config serializes");
        let mut out = Vec::new();
        flatten("", &value, &mut out);
        out
    }
}

fn flatten(prefix: &str, v: &toml::Value, out: &mut Vec<(String, String)>) {
    match v {
        toml::Value::Table(t) => {
            for (k, v) in t {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&key, v, out);
            }
        }
        toml::Value::String(s) => out.push((prefix.to_string(), s.clone())),
        other => out.push((prefix.to_string(), other.to_string())),
    }
}
