use lab_core::circle::Representation;
use lab_core::field::{exact_fuchsian_field, ghost_transports, neighbor_masses, stencil_weights};
use lab_core::group::SurfaceGroup;
use lab_core::mesh::{build_mesh, EAST, NORTH, SOUTH, WEST};
use std::f64::consts::TAU;
use std::sync::Arc;

fn main() {
    let group = Arc::new(SurfaceGroup::punctured_torus().unwrap());
    let rep = Representation::fuchsian_boundary(&group, 4096);
    let mesh = Arc::new(build_mesh(&group, 16, 0.4).unwrap());
    let t = 128usize;
    let n = mesh.cell_count();
    let oracle = exact_fuchsian_field(&mesh, t);
    let transports = ghost_transports(&mesh, &rep, t).unwrap();
    let weights: Vec<[f64;4]> = (0..n).map(|c| stencil_weights(&mesh, c)).collect();
    // start FROM THE ORACLE: if the oracle is near the fixed point, we stay; if
    // the system drifts away, the fixed point genuinely differs
    let mut cur = oracle.masses.clone();
    let mut next = vec![0.0; n*t];
    let rel = |a: &Vec<f64>| {
        let mut num = 0.0; let mut den = 0.0;
        for i in 0..a.len() { num += (a[i]-oracle.masses[i]).abs(); den += oracle.masses[i]; }
        num/den
    };
    for sweep in 0..200_001u64 {
        if sweep % 25_000 == 0 {
            println!("sweep {sweep}: relL1 to oracle = {:.4}", rel(&cur));
        }
        let mut gathered = vec![0.0; t];
        let mut scratch = vec![0.0; t];
        for c in 0..n {
            let mut acc = vec![0.0; t];
            for dir in [EAST, WEST, NORTH, SOUTH] {
                neighbor_masses(&cur, t, &mesh, &transports, mesh.neighbors[c][dir], &mut scratch, &mut gathered);
                for k in 0..t { acc[k] += weights[c][dir]*gathered[k]; }
            }
            let total: f64 = acc.iter().sum();
            let scale = TAU/total;
            for k in 0..t { next[c*t+k] = acc[k]*scale; }
        }
        std::mem::swap(&mut cur, &mut next);
    }
}
