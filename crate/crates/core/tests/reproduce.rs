use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use hshadow::reproduce::*;

fn text(cell: &Cell) -> String {
    cell.to_string()
}

fn num(cell: &Cell) -> f64 {
    match cell {
        Cell::Num(v) => *v,
        Cell::Int(v) => *v as f64,
        Cell::Text(t) => panic!("expected a number, found {t:?}"),
    }
}

#[test]
fn fig6_hamiltonian_shadow_converges_to_the_fidelity() {
    let s = fig6(3, &[1_000, 20_000], 5).unwrap();
    assert_eq!(s.rows.len(), 4);
    let (method, estimate, se) = (s.column("method").unwrap(), s.column("estimate").unwrap(), s.column("std_error").unwrap());
    let last = s.rows.iter().rev().find(|r| text(&r[method]) == "hamiltonian-shadow").unwrap();
    assert!((num(&last[estimate]) - 1.0).abs() < 4.0 * num(&last[se]));
    assert!(s.rows.iter().any(|r| text(&r[method]) == "global-shadow-formula"));
}

#[test]
fn fig8_finite_window_exceeds_ideal_and_gap_grows_with_size() {
    let s = fig8(&[2, 3, 4, 5], 4.0, 3).unwrap();
    let (n, k, gap) = (s.column("n").unwrap(), s.column("k").unwrap(), s.column("log_gap").unwrap());
    let finite = s.numbers("frame_potential_finite");
    let ideal = s.numbers("frame_potential_rdu");
    for (f, i) in finite.iter().zip(&ideal) {
        assert!(f >= &(i * (1.0 - 1e-9)), "finite {f} below ideal {i}");
    }
    let gaps: Vec<f64> = s.rows.iter().filter(|r| num(&r[k]) == 2.0).map(|r| num(&r[gap])).collect();
    assert_eq!(gaps.len(), 4);
    assert!(gaps.last().unwrap() > gaps.first().unwrap(), "{gaps:?}");
    assert!(s.rows.iter().all(|r| num(&r[n]) >= 2.0));
}

#[test]
fn fig10_variance_blows_up_near_incomplete_angles() {
    let thetas = [0.0, 0.05, FRAC_PI_4, FRAC_PI_2 - 0.05, FRAC_PI_2, PI - 0.05, PI];
    let s = fig10(&thetas, 0, 1).unwrap();
    let (complete, exact) = (s.column("complete").unwrap(), s.column("variance_exact").unwrap());
    for i in [0, 4, 6] {
        assert_eq!(text(&s.rows[i][complete]), "false", "theta {}", thetas[i]);
        assert_eq!(text(&s.rows[i][exact]), "incomplete");
    }
    let middle = num(&s.rows[2][exact]);
    for i in [1, 3, 5] {
        assert!(num(&s.rows[i][exact]) > 3.0 * middle, "theta {}: {} vs {middle}", thetas[i], num(&s.rows[i][exact]));
    }
}

#[test]
fn series_write_header_notes_and_rows() {
    let s = fig10(&[0.3, 0.9], 0, 2).unwrap();
    let mut buf = Vec::new();
    s.write_csv(&mut buf).unwrap();
    let out = String::from_utf8(buf).unwrap();
    let header = out.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(header, s.columns.join(","));
    assert_eq!(out.lines().filter(|l| !l.starts_with('#')).count(), 3);
}

#[test]
fn figure_keys_parse() {
    for f in Figure::ALL {
        assert_eq!(Figure::parse(f.key()).unwrap(), f);
    }
    assert!(Figure::parse("fig99").is_err());
}

#[test]
fn figures_are_deterministic_in_the_seed() {
    assert_eq!(fig3a(2, &[0.5], 200, 4).unwrap(), fig3a(2, &[0.5], 200, 4).unwrap());
    assert_ne!(fig3a(2, &[0.5], 200, 4).unwrap(), fig3a(2, &[0.5], 200, 5).unwrap());
}
