use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{Point, TriangleMesh, Vector};

/// Taubin lambda/mu smoothing weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaubinParams {
    pub lambda: f64,
    pub mu: f64,
}

impl Default for TaubinParams {
    fn default() -> Self {
        TaubinParams { lambda: 0.5, mu: -0.53 }
    }
}

impl TaubinParams {
    /// Weights from `lambda` and the pass-band frequency `1/lambda + 1/mu`.
    pub fn from_pass_band(lambda: f64, pass_band: f64) -> Result<Self> {
        let p = TaubinParams {
            lambda,
            mu: 1.0 / (pass_band - 1.0 / lambda),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn pass_band(&self) -> f64 {
        1.0 / self.lambda + 1.0 / self.mu
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda < 1.0 && self.mu < -self.lambda && self.mu > -1.0) {
            return Err(Error::InvalidArgument(format!(
                "Taubin weights need 0 < lambda < -mu < 1, got lambda = {}, mu = {}",
                self.lambda, self.mu
            )));
        }
        Ok(())
    }
}

/// Unique one-ring neighbours of every vertex, sorted.
pub(crate) fn vertex_rings(mesh: &TriangleMesh) -> Vec<Vec<u32>> {
    let mut rings = vec![Vec::new(); mesh.vertex_count()];
    for t in mesh.triangles() {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            rings[a as usize].push(b);
            rings[b as usize].push(a);
        }
    }
    for r in &mut rings {
        r.sort_unstable();
        r.dedup();
    }
    rings
}

/// Taubin smoothing with the uniform umbrella operator: each iteration is a
/// shrinking step with `lambda` followed by an inflating step with `mu`.
/// Connectivity is untouched, so watertightness carries over.
pub fn smooth_mesh(mesh: &TriangleMesh, iterations: usize, params: &TaubinParams) -> Result<TriangleMesh> {
    params.validate()?;
    if iterations == 0 {
        return Ok(mesh.clone());
    }
    let rings = vertex_rings(mesh);
    let mut pos: Vec<Point> = mesh.vertices().to_vec();
    let mut next = pos.clone();
    for _ in 0..iterations {
        for w in [params.lambda, params.mu] {
            for (i, ring) in rings.iter().enumerate() {
                if ring.is_empty() {
                    next[i] = pos[i];
                    continue;
                }
                let mut acc = Vector::zeros();
                for &j in ring {
                    acc += pos[j as usize] - pos[i];
                }
                next[i] = pos[i] + acc * (w / ring.len() as f64);
            }
            std::mem::swap(&mut pos, &mut next);
        }
    }
    let out = TriangleMesh::new(pos, mesh.triangles().to_vec()).map_err(|_| Error::Collapsed)?;
    if out.triangle_count() != mesh.triangle_count() {
        return Err(Error::Collapsed);
    }
    Ok(out)
}
