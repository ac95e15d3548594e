use lab_core::circle::Representation;
use lab_core::field::{exact_fuchsian_field, solve_harmonic_field, SolveOptions};
use lab_core::group::SurfaceGroup;
use lab_core::mesh::{build_mesh, Chart};
use std::sync::Arc;

fn main() {
    let group = Arc::new(SurfaceGroup::punctured_torus().unwrap());
    let rep = Representation::fuchsian_boundary(&group, 4096);
    let mesh = Arc::new(build_mesh(&group, 16, 0.4).unwrap());
    let t = 128;
    let oracle = exact_fuchsian_field(&mesh, t);
    let (field, _) = solve_harmonic_field(
        &rep, &mesh, t,
        &SolveOptions { tol: 1e-9, max_sweeps: 400_000, damping: 1.0, nested: false },
    ).unwrap();
    // per-cell relative L1 dev, grouped
    let mut rows: Vec<(String, f64, usize)> = vec![];
    for c in 0..mesh.cell_count() {
        let mut num = 0.0; let mut den = 0.0;
        for k in 0..t {
            num += (field.masses[c*t+k] - oracle.masses[c*t+k]).abs();
            den += oracle.masses[c*t+k];
        }
        let tag = match mesh.cells[c].chart {
            Chart::Disk => format!("bulk r={:.1}", mesh.cells[c].center.norm()),
            Chart::Cusp { .. } => format!("cusp v={:.0}", mesh.cells[c].chart_pos.1),
        };
        rows.push((tag, num/den, c));
    }
    use std::collections::BTreeMap;
    let mut by: BTreeMap<String,(f64,usize)> = BTreeMap::new();
    for (tag, d, _) in &rows {
        let e = by.entry(tag.clone()).or_insert((0.0,0));
        e.0 += d; e.1 += 1;
    }
    for (tag,(s,n)) in by { println!("{tag}: mean dev {:.3} over {n}", s/n as f64); }
    // base cell profiles
    let base = field.base_cell();
    let fm = field.cell_masses(base);
    let om = oracle.cell_masses(base);
    let mx = |v: &[f64]| { let (i,m) = v.iter().enumerate().max_by(|a,b| a.1.partial_cmp(b.1).unwrap()).unwrap(); (i,*m) };
    println!("base cell: solved max {:?} oracle max {:?} (uniform = {:.4})", mx(fm), mx(om), std::f64::consts::TAU/t as f64);
}
