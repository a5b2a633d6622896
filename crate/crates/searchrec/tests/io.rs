use std::fs;

use proptest::prelude::*;
use searchrec::formats::catalog::{load_catalog, write_catalog, ColumnMapping};
use searchrec::formats::clickstream::{load_raw_sessions, load_sessions, sessions_to_jsonl, write_raw_sessions, write_sessions};
use searchrec::formats::policy::{read_consumer_policy, read_rec_policy, write_consumer_policy, write_rec_policy};
use searchrec::formats::tables::{margins_table, matrix_table, read_margins, read_matrix, round_row};
use searchrec::formats::value::{decode, encode, read_value_table, write_value_table};
use searchrec::Error;
use searchrec_core::catalog::{reference_profiles, synthetic_catalog};
use searchrec_core::clickstream::{diagonal_matrix, generate_synthetic, GenerateConfig, TruthModel, TruthParams};
use searchrec_core::dpsolver::{bellman_solve, DecisionModel, ScenarioModifiers};
use searchrec_core::{RecPolicy, SimplexLattice};

fn sessions(n: usize, k: usize, horizon: usize, seed: u64) -> Vec<searchrec_core::Session> {
    let truth = TruthModel::new(TruthParams::calibrated(k), horizon);
    let rec = RecPolicy::StaticMatrix { rows: diagonal_matrix(k, 0.6) };
    let cfg = GenerateConfig { n_sessions: n, horizon, seed, first_click: vec![1.0 / k as f64; k] };
    generate_synthetic(&truth, &rec, &cfg)
}

#[test]
fn jsonl_roundtrip_is_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let s = sessions(300, 3, 8, 11);
    let a = dir.path().join("a.jsonl");
    write_sessions(&a, &s).unwrap();
    let back = load_sessions(&a, Some(3)).unwrap();
    assert_eq!(back, s);
    let b = dir.path().join("b.jsonl");
    write_sessions(&b, &back).unwrap();
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn jsonl_uses_one_based_clusters() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("s.jsonl");
    fs::write(
        &p,
        concat!(
            r#"{"sid":"a","t":1,"action":{"search":1},"recs":[]}"#,
            "\n",
            r#"{"sid":"a","t":2,"action":{"convert":2},"recs":[2,2,1]}"#,
            "\n",
            r#"{"sid":"b","t":1,"action":{"search":2}}"#,
            "\n",
            r#"{"sid":"b","t":2,"action":"exit","recs":[1,1,1]}"#,
            "\n"
        ),
    )
    .unwrap();
    let s = load_sessions(&p, Some(2)).unwrap();
    assert_eq!(s.len(), 2);
    assert_eq!(s[0].events[1].action, searchrec_core::Action::Convert(1));
    assert_eq!(s[0].events[1].recs, vec![1, 1, 0]);
    assert_eq!(s[1].events[1].action, searchrec_core::Action::Exit);
    let text = sessions_to_jsonl(&s);
    assert!(text.starts_with(r#"{"sid":"a","t":1,"action":{"search":1},"recs":[]}"#));
}

#[test]
fn jsonl_errors_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("s.jsonl");
    let msg = |body: &str, k: Option<usize>| {
        fs::write(&p, body).unwrap();
        match load_sessions(&p, k) {
            Err(e @ Error::Input { .. }) => {
                assert_eq!(e.exit_code(), 2);
                e.to_string()
            }
            other => panic!("expected input error, got {other:?}"),
        }
    };
    assert!(msg("{\"sid\":\"a\",\"t\":1,\"action\":{\"search\":0}}\n", None).contains("line 1: cluster indices are one-based"));
    assert!(msg("{\"sid\":\"a\",\"t\":1,\"action\":{\"search\":1}}\nnot json\n", None).contains("line 2"));
    let split = "{\"sid\":\"a\",\"t\":1,\"action\":{\"search\":1}}\n{\"sid\":\"b\",\"t\":1,\"action\":{\"search\":1}}\n{\"sid\":\"a\",\"t\":2,\"action\":\"exit\",\"recs\":[1,1,1]}\n";
    assert!(msg(split, None).contains("not contiguous"));
    assert!(msg("{\"sid\":\"a\",\"t\":1,\"action\":{\"search\":3}}\n", Some(2)).contains("line 1"));
    assert!(msg("{\"sid\":\"a\",\"t\":1,\"action\":{\"search\":1},\"extra\":1}\n", None).contains("extra"));
}

#[test]
fn vehicle_jsonl_accepts_string_and_numeric_ids() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("v.jsonl");
    fs::write(&p, "{\"sid\":\"x\",\"t\":1,\"action\":{\"search\":17}}\n{\"sid\":\"x\",\"t\":2,\"action\":{\"search\":\"v2\"},\"recs\":[\"v1\",3,\"v2\"]}\n").unwrap();
    let raw = load_raw_sessions(&p).unwrap();
    assert_eq!(raw[0].events[1].recs, vec!["v1", "3", "v2"]);
    let q = dir.path().join("w.jsonl");
    write_raw_sessions(&q, &raw).unwrap();
    assert_eq!(load_raw_sessions(&q).unwrap(), raw);
}

#[test]
fn catalog_roundtrip_and_mapping() {
    let dir = tempfile::tempdir().unwrap();
    let mut profiles = reference_profiles();
    profiles.iter_mut().for_each(|p| p.count = 5);
    let (cat, _) = synthetic_catalog(&profiles, 0.05, 3);
    let p = dir.path().join("c.csv");
    write_catalog(&p, &cat).unwrap();
    let back = load_catalog(&p, &ColumnMapping::default()).unwrap();
    assert_eq!(back.len(), cat.len());
    assert!(back.ids().eq(cat.ids()));

    let text = fs::read_to_string(&p).unwrap().replacen("vehicle_id", "stock_no", 1);
    let q = dir.path().join("renamed.csv");
    fs::write(&q, text).unwrap();
    let err = load_catalog(&q, &ColumnMapping::default()).unwrap_err().to_string();
    assert!(err.contains("missing column \"vehicle_id\""), "{err}");
    let mapping = ColumnMapping { vehicle_id: "stock_no".into(), ..ColumnMapping::default() };
    assert_eq!(load_catalog(&q, &mapping).unwrap().len(), cat.len());
}

#[test]
fn catalog_errors_name_the_row() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("c.csv");
    let header = "vehicle_id,body_style,transmission,drivetrain,num_accidents,num_owners,price,mileage,market_value\n";
    let good = "a,sedan,automatic,front,0,1,10000,20000,9000\n";
    fs::write(&p, format!("{header}{good}b,sedan,automatic,front,0,1,-5,20000,9000\n")).unwrap();
    let e = load_catalog(&p, &ColumnMapping::default()).unwrap_err().to_string();
    assert!(e.contains("row 2") && e.contains("price"), "{e}");
    fs::write(&p, format!("{header}{good}c,spaceship,automatic,front,0,1,1,1,1\n")).unwrap();
    let e = load_catalog(&p, &ColumnMapping::default()).unwrap_err().to_string();
    assert!(e.contains("row 2"), "{e}");
    fs::write(&p, format!("{header}{good}d,sedan,automatic,front,x,1,1,1,1\n")).unwrap();
    let e = load_catalog(&p, &ColumnMapping::default()).unwrap_err().to_string();
    assert!(e.contains("row 2") && e.contains("num_accidents"), "{e}");
}

fn small_table() -> searchrec_core::ValueTable {
    let truth = TruthModel::new(TruthParams::calibrated(2), 4);
    let model = DecisionModel::build(&truth, &SimplexLattice::new(2, 2), 4).unwrap();
    bellman_solve(&model, &[1.0, 2.0], &ScenarioModifiers::default()).unwrap()
}

#[test]
fn value_table_roundtrip_and_corruption() {
    let t = small_table();
    let bytes = encode(&t);
    assert_eq!(&bytes[..4], b"SRVT");
    assert_eq!(decode(&bytes).unwrap(), t);
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("v.bin");
    write_value_table(&p, &t).unwrap();
    assert_eq!(read_value_table(&p).unwrap(), t);

    assert!(decode(&bytes[..bytes.len() - 1]).unwrap_err().contains("truncated"));
    let mut extra = bytes.clone();
    extra.push(0);
    assert!(decode(&extra).unwrap_err().contains("trailing"));
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(decode(&bad).unwrap_err().contains("magic"));
    let mut v2 = bytes.clone();
    v2[4] = 2;
    assert!(decode(&v2).unwrap_err().contains("version"));
    let mut g = bytes;
    g[12] = 3; // lattice granularity no longer matches the stored lengths
    assert!(decode(&g).is_err());
}

#[test]
fn policy_envelopes_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let truth = TruthModel::new(TruthParams::random_linear(3, 5), 6);
    let policy = truth.to_policy().expect("linear truth");
    let p = dir.path().join("policy.json");
    write_consumer_policy(&p, &policy).unwrap();
    assert_eq!(read_consumer_policy(&p).unwrap(), policy);
    let text = fs::read_to_string(&p).unwrap();
    assert!(text.contains("\"version\": 1") && text.contains("\"indexing\": \"zero-based\""));
    fs::write(&p, text.replace("\"version\": 1", "\"version\": 9")).unwrap();
    assert!(read_consumer_policy(&p).unwrap_err().to_string().contains("unsupported version 9"));

    let rec = small_table().policy();
    let q = dir.path().join("rec.json");
    write_rec_policy(&q, &rec).unwrap();
    assert_eq!(read_rec_policy(&q).unwrap(), rec);
    assert!(read_consumer_policy(&q).unwrap_err().to_string().contains("expected format"));
}

#[test]
fn margins_and_matrices_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let m = vec![1500.25, 2200.0, 1.0 / 3.0];
    margins_table(&m).write_csv(dir.path()).unwrap();
    assert_eq!(read_margins(&dir.path().join("margins.csv")).unwrap(), m);
    let rows = diagonal_matrix(3, 0.7);
    matrix_table("m", "M", &rows).write_csv(dir.path()).unwrap();
    let back = read_matrix(&dir.path().join("m.csv")).unwrap();
    for (a, b) in back.iter().flatten().zip(rows.iter().flatten()) {
        assert!((a - b).abs() < 1e-3);
    }
}

proptest! {
    #[test]
    fn rounded_rows_sum_to_one(w in prop::collection::vec(0.0f64..1.0, 1..12)) {
        prop_assume!(w.iter().sum::<f64>() > 1e-6);
        let s: f64 = w.iter().sum();
        let row: Vec<f64> = w.iter().map(|x| x / s).collect();
        let r = round_row(&row, 3);
        let total: f64 = r.iter().map(|x| x.parse::<f64>().unwrap()).sum();
        prop_assert!((total - 1.0).abs() <= 0.001 + 1e-12);
        for (x, y) in r.iter().zip(&row) {
            prop_assert!((x.parse::<f64>().unwrap() - y).abs() <= 0.001 + 1e-12);
        }
    }
}
