use lab_core::circle::Representation;
use lab_core::field::{exact_fuchsian_field, solve_harmonic_field, SolveOptions};
use lab_core::group::SurfaceGroup;
use lab_core::mesh::{build_mesh, Chart};
use std::sync::Arc;

fn main() {
    let group = Arc::new(SurfaceGroup::punctured_torus().unwrap());
    let rep = Representation::fuchsian_boundary(&group, 4096);
    for (res, area) in [(16usize, 0.4), (16, 0.1), (16, 0.05)] {
        let mesh = Arc::new(build_mesh(&group, res, area).unwrap());
        let t = 128;
        let (field, report) = solve_harmonic_field(
            &rep, &mesh, t,
            &SolveOptions { tol: 1e-7, max_sweeps: 100_000, damping: 1.0, nested: false },
        ).unwrap();
        let oracle = exact_fuchsian_field(&mesh, t);
        // relative L1 overall and restricted to v <= 15 / bulk
        let mut num_all = 0.0; let mut den_all = 0.0;
        let mut num_sh = 0.0; let mut den_sh = 0.0;
        for c in 0..mesh.cell_count() {
            let shallow = match mesh.cells[c].chart {
                Chart::Disk => true,
                Chart::Cusp { .. } => mesh.cells[c].chart_pos.1 <= 15.0,
            };
            for k in 0..t {
                let d = (field.masses[c*t+k] - oracle.masses[c*t+k]).abs();
                let o = oracle.masses[c*t+k];
                num_all += d; den_all += o;
                if shallow { num_sh += d; den_sh += o; }
            }
        }
        println!("res {res} area {area}: vcut={:.0} sweeps={} relL1={:.4} relL1(v<=15)={:.4}",
            mesh.cusp_params[0].v_cut, report.sweeps, num_all/den_all, num_sh/den_sh);
    }
}
