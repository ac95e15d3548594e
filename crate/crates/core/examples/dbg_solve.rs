use lab_core::circle::Representation;
use lab_core::field::{exact_fuchsian_field, solve_harmonic_field, SolveOptions};
use lab_core::group::SurfaceGroup;
use lab_core::mesh::build_mesh;
use std::sync::Arc;
use std::time::Instant;

fn main() {
    let group = Arc::new(SurfaceGroup::punctured_torus().unwrap());
    let rep = Representation::fuchsian_boundary(&group, 4096);
    for res in [16usize, 32] {
        let mesh = Arc::new(build_mesh(&group, res, 0.4).unwrap());
        let t = 128;
        let start = Instant::now();
        let (field, report) = solve_harmonic_field(
            &rep, &mesh, t,
            &SolveOptions { tol: 1e-6, max_sweeps: 60_000, damping: 1.0, nested: true },
        ).unwrap();
        let oracle = exact_fuchsian_field(&mesh, t);
        // relative L1 distance over cells x bins
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..field.masses.len() {
            num += (field.masses[i] - oracle.masses[i]).abs();
            den += oracle.masses[i].abs();
        }
        println!(
            "res {res}: cells={} sweeps={} time={:?} relL1={:.4}",
            mesh.cell_count(), report.sweeps, start.elapsed(), num / den
        );
    }
}
