//! Node placement in a circular cell and average link powers.

use rand::Rng;

use crate::channel::NodeId;

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub positions: Vec<(f64, f64)>,
    /// Average channel power `E|h|^2`, row-major `from * n + to`.
    pub avg_power: Vec<f64>,
    pub radius: f64,
}

impl Topology {
    pub fn n_nodes(&self) -> usize {
        self.positions.len()
    }

    pub fn distance(&self, a: NodeId, b: NodeId) -> f64 {
        let (pa, pb) = (self.positions[a], self.positions[b]);
        (pa.0 - pb.0).hypot(pa.1 - pb.1)
    }

    pub fn avg_power(&self, from: NodeId, to: NodeId) -> f64 {
        self.avg_power[from * self.n_nodes() + to]
    }
}

/// Closest distance, as a fraction of the radius, used by the path-loss law.
pub const MIN_REL_DISTANCE: f64 = 0.1;

/// Average SNR (linear) at distance `d`: `snr_ref * max(d / R, 0.1)^-alpha`,
/// so a link spanning one cell radius sees exactly `snr_ref`.
pub fn path_loss_snr(d: f64, radius: f64, snr_ref: f64, alpha: f64) -> f64 {
    snr_ref * (d / radius).max(MIN_REL_DISTANCE).powf(-alpha)
}

/// Uniform point in a disc of radius `r` centred at the origin.
pub fn uniform_in_disc<R: Rng + ?Sized>(r: f64, rng: &mut R) -> (f64, f64) {
    let rho = r * rng.random::<f64>().sqrt();
    let theta = std::f64::consts::TAU * rng.random::<f64>();
    (rho * theta.cos(), rho * theta.sin())
}

/// Places `n` nodes uniformly in the cell and converts the distance-based
/// average SNR into average channel power `snr * sigma^2 / P`.
pub fn build_topology<R: Rng + ?Sized>(
    n_nodes: usize,
    cell_radius: f64,
    avg_snr_db: f64,
    alpha: f64,
    tx_power: f64,
    noise_var: f64,
    rng: &mut R,
) -> Topology {
    assert!(n_nodes >= 2, "a cell needs at least two nodes");
    let positions: Vec<(f64, f64)> = (0..n_nodes)
        .map(|_| uniform_in_disc(cell_radius, rng))
        .collect();
    let snr_ref = 10f64.powf(avg_snr_db / 10.0);
    let mut avg_power = vec![0.0; n_nodes * n_nodes];
    for a in 0..n_nodes {
        for b in 0..n_nodes {
            if a == b {
                continue;
            }
            let (pa, pb) = (positions[a], positions[b]);
            let d = (pa.0 - pb.0).hypot(pa.1 - pb.1);
            avg_power[a * n_nodes + b] =
                path_loss_snr(d, cell_radius, snr_ref, alpha) * noise_var / tx_power;
        }
    }
    Topology {
        positions,
        avg_power,
        radius: cell_radius,
    }
}
