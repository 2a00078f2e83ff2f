use serde::Deserialize;
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    #[default]
    Toy,
    NormalFormTest,
    UserCoefficients,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct Params {
    pub eps: Option<f64>,
    pub gamma: Option<f64>,
    pub lambda: Option<f64>,
    pub omega: Option<f64>,
    pub mu: Option<f64>,
    pub rho: Option<f64>,
    pub delta_dom: Option<f64>,
    /// Rotation angle for the planar models.
    pub psi: Option<f64>,
    /// Target LC of the synthetic normal form (manifold control runs).
    pub lc: Option<f64>,
    /// Complex coefficients `[re, im]` keyed by monomial: "20", "11", "02", "30", "21", "12", "03".
    pub coefficients: Option<BTreeMap<String, [f64; 2]>>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub k: Option<Vec<usize>>,
    pub t: Option<f64>,
    pub t_points: Option<usize>,
    pub t_range: Option<[f64; 2]>,
    pub omega_range: Option<[f64; 2]>,
    pub omega_points: Option<usize>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct Solver {
    pub newton_tol: Option<f64>,
    pub product_tol: Option<f64>,
    pub max_outer: Option<usize>,
    // manifold growth
    pub seed_radius: Option<f64>,
    pub max_generations: Option<usize>,
    pub resolution: Option<f64>,
    pub budget: Option<usize>,
    pub delta_prime: Option<f64>,
    pub stable_y: Option<f64>,
    // implicit equations
    pub g: Option<Vec<String>>,
    pub h: Option<Vec<String>>,
    pub x: Option<Vec<f64>>,
    pub x_box: Option<Vec<[f64; 2]>>,
    pub y_box: Option<Vec<[f64; 2]>>,
    pub tol: Option<f64>,
    pub sup_h: Option<f64>,
    pub sup_hy: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct Output {
    pub csv: Option<String>,
    pub json: Option<String>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub model: ModelKind,
    #[serde(default)]
    pub params: Params,
    #[serde(default)]
    pub sweep: Sweep,
    #[serde(default)]
    pub solver: Solver,
    #[serde(default)]
    pub output: Output,
    #[serde(default)]
    pub seed: u64,
}

impl Scenario {
    pub fn load(path: Option<&Path>) -> Result<Self, String> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
                Self::parse(&text)
            }
        }
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        serde_json::from_str(text).map_err(|e| format!("config: {e}"))
    }
}
