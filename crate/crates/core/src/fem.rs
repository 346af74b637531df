//! P1 finite-element assembly of the mass and stiffness matrices.

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::sparse::SymSparse;

/// Assembled mass and stiffness matrices for a mesh.
#[derive(Debug, Clone)]
pub struct FemMatrices {
    /// full (consistent) mass matrix, kept for diagnostics
    pub mass: SymSparse,
    /// row sums of the mass matrix (lumped mass)
    pub mass_lumped: Vec<f64>,
    /// stiffness matrix; rows sum to zero
    pub stiffness: SymSparse,
}

pub fn assemble_fem(mesh: &Mesh) -> Result<FemMatrices> {
    mesh.validate()?;
    let m = mesh.n_nodes();
    let mut c_trip = Vec::new();
    let mut g_trip = Vec::new();
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let [a, b, c] = *tri;
        let (pa, pb, pc) = (mesh.nodes[a], mesh.nodes[b], mesh.nodes[c]);
        let det = (pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]);
        let area = 0.5 * det.abs();
        if area < 1e-12 {
            return Err(Error::DegenerateTriangle { tri: t, area });
        }
        // element mass: (area/12) * [[2,1,1],[1,2,1],[1,1,2]]
        let idx = [a, b, c];
        for i in 0..3 {
            for j in 0..3 {
                let v = area / 12.0 * if i == j { 2.0 } else { 1.0 };
                c_trip.push((idx[i], idx[j], v));
            }
        }
        // P1 gradients: grad phi_i constant per element
        let grads = [
            [pb[1] - pc[1], pc[0] - pb[0]],
            [pc[1] - pa[1], pa[0] - pc[0]],
            [pa[1] - pb[1], pb[0] - pa[0]],
        ];
        for i in 0..3 {
            for j in 0..3 {
                let dot = grads[i][0] * grads[j][0] + grads[i][1] * grads[j][1];
                g_trip.push((idx[i], idx[j], dot / (4.0 * area)));
            }
        }
    }
    let mass = SymSparse::from_triplets(m, &c_trip);
    let stiffness = SymSparse::from_triplets(m, &g_trip);
    let mut mass_lumped = vec![0.0; m];
    for (i, _, v) in mass.iter() {
        mass_lumped[i] += v;
    }
    if mass_lumped.iter().any(|&v| v <= 0.0) {
        return Err(Error::InvalidArgument(
            "lumped mass has a nonpositive entry".into(),
        ));
    }
    Ok(FemMatrices {
        mass,
        mass_lumped,
        stiffness,
    })
}
