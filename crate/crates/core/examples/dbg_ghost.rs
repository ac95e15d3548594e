use lab_core::circle::Representation;
use lab_core::field::{exact_fuchsian_field, ghost_transports, neighbor_masses};
use lab_core::geom::poisson_kernel;
use lab_core::group::SurfaceGroup;
use lab_core::mesh::{build_mesh, NeighborRef};
use std::sync::Arc;

fn main() {
    let group = Arc::new(SurfaceGroup::punctured_torus().unwrap());
    let mesh = Arc::new(build_mesh(&group, 24, 0.4).unwrap());
    let t = 128;
    let dt = std::f64::consts::TAU / t as f64;
    let field = exact_fuchsian_field(&mesh, t);
    let rep = Representation::fuchsian_boundary(&group, 4096);
    let transports = ghost_transports(&mesh, &rep, t).unwrap();
    let mut shown = 0;
    let mut worst_all = (0.0f64, 0usize, String::new());
    for c in 0..mesh.cell_count() {
        for dir in 0..4 {
            if let NeighborRef::Ghost(g) = mesh.neighbors[c][dir] {
                let link = &mesh.ghosts[g];
                if link.clamped { continue; }
                let p = mesh.neighbor_point(c, dir);
                let mut out = vec![0.0; t];
                let mut scratch = vec![0.0; t];
                neighbor_masses(&field.masses, t, &mesh, &transports, mesh.neighbors[c][dir], &mut scratch, &mut out);
                // direct: Poisson kernel at the unfolded point
                let direct: Vec<f64> = (0..t).map(|k| poisson_kernel(p, (k as f64 + 0.5) * dt) * dt).collect();
                let num: f64 = (0..t).map(|k| (out[k] - direct[k]).abs()).sum();
                let den: f64 = direct.iter().sum();
                let rel = num / den;
                if rel > worst_all.0 {
                    worst_all = (rel, c, format!("dir {dir} word len {} chart {:?}", link.word.0.len(), mesh.cells[c].chart));
                }
                if rel > 0.05 && shown < 5 {
                    println!("cell {c} dir {dir}: rel dev {rel:.4}, word {:?}, clamp {}", link.word.0, link.clamped);
                    shown += 1;
                }
            }
        }
    }
    println!("worst: {:?}", worst_all);
}
