use starscatter::core::bc::BoundaryPair;
use starscatter::core::linalg::c;
use starscatter::core::potential::Preset;
use starscatter::io::{self, BoundaryFile, PotentialFile, Table};
use starscatter::AppError;

#[test]
fn potential_file_round_trips() {
    let pg = Preset::from_name("coupled_channels", |_| None)
        .unwrap()
        .build(0.05, Some(2.0))
        .unwrap();
    let file = PotentialFile::from_grid(&pg);
    let text = io::to_toml(&file).unwrap();
    let back: PotentialFile = toml::from_str(&text).unwrap();
    assert_eq!(back, file);
    let grid = back.to_grid().unwrap();
    assert_eq!(grid.n, 2);
    assert_eq!(grid.samples, pg.samples);
    assert_eq!(back.digest().unwrap(), file.digest().unwrap());
}

#[test]
fn digest_tracks_the_samples() {
    let pg = Preset::from_name("square_well", |_| None)
        .unwrap()
        .build(0.05, None)
        .unwrap();
    let mut file = PotentialFile::from_grid(&pg);
    let before = file.digest().unwrap();
    file.samples[0] += 1e-12;
    assert_ne!(file.digest().unwrap(), before);
}

#[test]
fn short_potential_file_is_a_config_error() {
    let file = PotentialFile {
        n: 1,
        x_max: 1.0,
        h: 0.1,
        samples: vec![0.0; 6],
    };
    assert!(matches!(file.to_grid(), Err(AppError::Config(_))));
}

#[test]
fn boundary_file_round_trips() {
    let bp = BoundaryPair::mixed(2, 0.7);
    let file = BoundaryFile::from_pair(&bp);
    let back: BoundaryFile = toml::from_str(&io::to_toml(&file).unwrap()).unwrap();
    let pair = back.to_pair().unwrap();
    assert!((&pair.a - &bp.a).norm() < 1e-15);
    assert!((&pair.b - &bp.b).norm() < 1e-15);
}

#[test]
fn rank_deficient_boundary_is_a_domain_error() {
    let file = BoundaryFile {
        n: 1,
        a_re: vec![0.0],
        a_im: vec![0.0],
        b_re: vec![0.0],
        b_im: vec![0.0],
    };
    let err = file.to_pair().unwrap_err();
    assert!(matches!(err, AppError::Domain(_)));
    assert_eq!(err.exit_code(), 1);
}

#[test]
fn table_text_is_stable() {
    let mut t = Table::new(&["k", "value"]).meta("n", 1);
    t.push(vec![0.1, -2.5]);
    t.push(vec![0.2, 1.0 / 3.0]);
    let text = t.to_csv().unwrap();
    assert_eq!(
        text,
        "# n = 1\nk,value\n1.00000000000000006e-1,-2.50000000000000000e0\n\
         2.00000000000000011e-1,3.33333333333333315e-1\n"
    );
    // every value survives a parse
    let parsed: Vec<f64> = text
        .lines()
        .nth(3)
        .unwrap()
        .split(',')
        .map(|s| s.parse().unwrap())
        .collect();
    assert_eq!(parsed, vec![0.2, 1.0 / 3.0]);
}

#[test]
fn matrix_columns_match_values() {
    let m = starscatter::core::linalg::CMat::from_fn(2, 2, |r, k| c(r as f64, k as f64));
    let mut row = Vec::new();
    io::matrix_values(&m, &mut row);
    let cols = io::matrix_columns("S", 2);
    assert_eq!(cols.len(), row.len());
    assert_eq!(cols[3], "S_im_01");
    assert_eq!(row[3], 1.0);
}
