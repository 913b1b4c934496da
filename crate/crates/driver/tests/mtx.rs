use std::path::PathBuf;

use sdqlite::interp::{exact_eq, parse_value};
use sdqlite_driver::mtx::{load_matrix_market, parse_matrix_market};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

#[test]
fn general_fixture_loads_as_coo_and_csr() {
    let m = load_matrix_market(fixture("general_4x4.mtx")).unwrap();
    assert_eq!((m.rows, m.cols, m.nnz()), (4, 4, 6));
    assert_eq!(m.row, vec![0, 0, 1, 1, 3, 3]);
    assert_eq!(m.col, vec![0, 2, 1, 3, 0, 3]);
    let (pos, idx, val) = m.to_csr();
    assert_eq!(pos, vec![0, 2, 4, 4, 6]);
    assert_eq!(idx, vec![0, 2, 1, 3, 0, 3]);
    assert_eq!(val, vec![2.5, -1.0, 0.5, 4.0, 1.25, 3.0]);
}

#[test]
fn symmetric_fixture_mirrors_off_diagonal_entries() {
    let m = load_matrix_market(fixture("symmetric_3x3.mtx")).unwrap();
    assert_eq!(m.nnz(), 6);
    let want = parse_value("{0 -> {0 -> 1.0, 1 -> 2.0}, 1 -> {0 -> 2.0, 2 -> -0.5}, 2 -> {1 -> -0.5, 2 -> 4.0}}").unwrap();
    assert!(exact_eq(&m.to_value(), &want), "{}", m.to_value());
}

#[test]
fn fixtures_round_trip_through_text() {
    for name in ["general_4x4.mtx", "symmetric_3x3.mtx"] {
        let m = load_matrix_market(fixture(name)).unwrap();
        let again = parse_matrix_market(&m.to_text()).unwrap();
        let triplets = |m: &sdqlite_driver::mtx::MatrixMarket| {
            let mut t: Vec<_> = (0..m.nnz()).map(|e| (m.row[e], m.col[e], m.val[e].to_bits())).collect();
            t.sort();
            t
        };
        assert_eq!(triplets(&m), triplets(&again), "{}", name);
    }
}
