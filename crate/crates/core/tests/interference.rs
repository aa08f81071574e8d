mod support;

use coexist::exec::Exec;
use coexist::propagation::*;
use num_complex::Complex64;

#[test]
fn zero_reflection_matches_line_of_sight_bit_for_bit() {
    let (sat, pixels, deployment) = support::interference_scene(0.002, 9);
    let mut params = InterferenceParams::default();
    params.gamma = Complex64::new(0.0, 0.0);
    let los = interference_grid(&pixels, &deployment, PathModel::LosOnly, &sat.radiometer, &params, Exec::Parallel).unwrap();
    let two = interference_grid(&pixels, &deployment, PathModel::TwoRay, &sat.radiometer, &params, Exec::Parallel).unwrap();
    let lit = los.iter().filter(|s| !s.contributors.is_empty()).count();
    assert!(lit > 100, "only {lit} pixels see a transmitter");
    for (a, b) in los.iter().zip(&two) {
        assert_eq!(a.aggregate.to_bits(), b.aggregate.to_bits());
    }
}

#[test]
fn grid_is_identical_in_both_execution_modes() {
    let (sat, pixels, deployment) = support::interference_scene(0.002, 3);
    let params = InterferenceParams::default();
    let run = |exec| interference_grid(&pixels, &deployment, PathModel::TwoRay, &sat.radiometer, &params, exec).unwrap();
    let (s, p) = (run(Exec::Sequential), run(Exec::Parallel));
    let mut a = Vec::new();
    let mut b = Vec::new();
    write_grid_csv(&s, &mut a).unwrap();
    write_grid_csv(&p, &mut b).unwrap();
    assert_eq!(a, b);
}

#[test]
fn contributions_recompute_from_their_parts() {
    let (sat, pixels, deployment) = support::interference_scene(0.002, 5);
    let params = InterferenceParams::default();
    let grid = interference_grid(&pixels[..200], &deployment, PathModel::TwoRay, &sat.radiometer, &params, Exec::Parallel).unwrap();
    for s in &grid {
        for c in &s.contributors {
            assert!((c.recompute() - c.contribution).abs() < 1e-9);
            assert!(c.two_ray_gain_db <= 20.0 * 2f64.log10() + 1e-12);
            assert!(c.two_ray_gain_db >= params.null_floor_db);
        }
        if !s.contributors.is_empty() {
            let max = s.contributors.iter().map(|c| c.contribution).fold(f64::NEG_INFINITY, f64::max);
            assert!(s.aggregate >= max - 1e-9);
        }
    }
}

#[test]
fn deployment_survives_jsonl_round_trip() {
    let (_, _, deployment) = support::interference_scene(0.0005, 1);
    let mut buf = Vec::new();
    write_deployment_jsonl(&deployment, &mut buf).unwrap();
    let back = read_deployment_jsonl(std::io::Cursor::new(buf)).unwrap();
    assert_eq!(back, deployment);
}

#[test]
fn indexed_grid_matches_direct_evaluation() {
    let (sat, pixels, deployment) = support::interference_scene(0.002, 8);
    let params = InterferenceParams::default();
    let grid = interference_grid(&pixels[..150], &deployment, PathModel::TwoRay, &sat.radiometer, &params, Exec::Parallel).unwrap();
    for ((state, fp), g) in pixels.iter().zip(&grid) {
        let direct = aggregate_interference(fp, state, &deployment, PathModel::TwoRay, &sat.radiometer, &params).unwrap();
        assert_eq!(&direct, g);
    }
}
