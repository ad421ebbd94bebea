use serde::{Deserialize, Serialize};

use super::SurfaceMesh;
use crate::error::{BbemError, Result};
use crate::kernels::Vec3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum PatchLabel {
    Dirichlet,
    Neumann,
}

impl PatchLabel {
    pub fn other(self) -> PatchLabel {
        match self {
            PatchLabel::Dirichlet => PatchLabel::Neumann,
            PatchLabel::Neumann => PatchLabel::Dirichlet,
        }
    }
}

/// How panels are assigned to the Dirichlet and Neumann patches.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PatchRule {
    /// Panels whose centroid satisfies `normal·c - offset > 0` get `positive_side`.
    Plane { normal: [f64; 3], offset: f64, positive_side: PatchLabel },
    /// Cube faces named `"+x"`, `"-x"`, ..., `"-z"` are Neumann; the rest Dirichlet.
    CubeFaces { neumann_faces: Vec<String> },
    /// Whole boundary carries one label.
    Uniform { label: PatchLabel },
}

#[derive(Clone, Debug, PartialEq)]
pub struct PatchLabeling {
    pub panel_label: Vec<PatchLabel>,
}

impl PatchLabeling {
    pub fn uniform(n: usize, label: PatchLabel) -> PatchLabeling {
        PatchLabeling { panel_label: vec![label; n] }
    }

    pub fn len(&self) -> usize {
        self.panel_label.len()
    }

    pub fn is_empty(&self) -> bool {
        self.panel_label.is_empty()
    }

    pub fn count(&self, label: PatchLabel) -> usize {
        self.panel_label.iter().filter(|&&l| l == label).count()
    }

    pub fn n_dirichlet(&self) -> usize {
        self.count(PatchLabel::Dirichlet)
    }

    pub fn n_neumann(&self) -> usize {
        self.count(PatchLabel::Neumann)
    }

    pub fn indices(&self, label: PatchLabel) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.panel_label[i] == label).collect()
    }

    pub fn is(&self, panel: usize, label: PatchLabel) -> bool {
        self.panel_label[panel] == label
    }

    /// Both patches must be nonempty for a mixed problem.
    pub fn validate_mixed(&self, n_panels: usize) -> Result<()> {
        if self.len() != n_panels {
            return Err(BbemError::InvalidLabeling(format!(
                "labeling has {} entries for {n_panels} panels",
                self.len()
            )));
        }
        if self.n_dirichlet() == 0 {
            return Err(BbemError::InvalidLabeling("Dirichlet patch is empty".into()));
        }
        if self.n_neumann() == 0 {
            return Err(BbemError::InvalidLabeling("Neumann patch is empty".into()));
        }
        Ok(())
    }
}

fn face_axis(name: &str) -> Result<(usize, f64)> {
    let (sign, axis) = name.split_at(1);
    let s = match sign {
        "+" => 1.0,
        "-" => -1.0,
        _ => return Err(BbemError::InvalidLabeling(format!("bad face name {name:?}"))),
    };
    let a = match axis {
        "x" => 0,
        "y" => 1,
        "z" => 2,
        _ => return Err(BbemError::InvalidLabeling(format!("bad face name {name:?}"))),
    };
    Ok((a, s))
}

pub fn label_patches(mesh: &SurfaceMesh, rule: &PatchRule) -> Result<PatchLabeling> {
    let labels = match rule {
        PatchRule::Uniform { label } => vec![*label; mesh.len()],
        PatchRule::Plane { normal, offset, positive_side } => {
            let n = Vec3::from(*normal);
            if !(n.norm() > 0.0) {
                return Err(BbemError::InvalidLabeling("plane normal must be nonzero".into()));
            }
            mesh.panels()
                .iter()
                .map(|p| if n.dot(&p.centroid) - offset > 0.0 { *positive_side } else { positive_side.other() })
                .collect()
        }
        PatchRule::CubeFaces { neumann_faces } => {
            let faces: Vec<(usize, f64)> = neumann_faces.iter().map(|f| face_axis(f)).collect::<Result<_>>()?;
            let (lo, hi) = mesh.bounding_box();
            let tol = 1e-9 * mesh.scale();
            mesh.panels()
                .iter()
                .map(|p| {
                    let on = faces.iter().any(|&(a, s)| {
                        let target = if s > 0.0 { hi[a] } else { lo[a] };
                        (p.centroid[a] - target).abs() <= tol && p.normal[a] * s > 0.5
                    });
                    if on {
                        PatchLabel::Neumann
                    } else {
                        PatchLabel::Dirichlet
                    }
                })
                .collect()
        }
    };
    Ok(PatchLabeling { panel_label: labels })
}
