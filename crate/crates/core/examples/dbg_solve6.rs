use lab_core::circle::Representation;
use lab_core::field::{exact_fuchsian_field, solve_harmonic_field, SolveOptions};
use lab_core::group::SurfaceGroup;
use lab_core::mesh::build_mesh;
use std::sync::Arc;

fn main() {
    let group = Arc::new(SurfaceGroup::punctured_torus().unwrap());
    let rep = Representation::fuchsian_boundary(&group, 4096);
    let mesh = Arc::new(build_mesh(&group, 16, 0.4).unwrap());
    for t in [64usize, 128, 256, 512] {
        let oracle = exact_fuchsian_field(&mesh, t);
        let (field, report) = solve_harmonic_field(
            &rep, &mesh, t,
            &SolveOptions { tol: 1e-9, max_sweeps: 400_000, damping: 1.0, nested: false },
        ).unwrap();
        let mut num = 0.0; let mut den = 0.0;
        for i in 0..field.masses.len() {
            num += (field.masses[i] - oracle.masses[i]).abs();
            den += oracle.masses[i].abs();
        }
        println!("T {t}: sweeps={} relL1={:.4}", report.sweeps, num/den);
    }
}
