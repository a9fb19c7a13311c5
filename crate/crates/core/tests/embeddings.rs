use lexsub_core::embedding::{EmbeddingFormat, EmbeddingMatrix};
use proptest::prelude::*;

fn matrices() -> impl Strategy<Value = (usize, Vec<Vec<f64>>)> {
    (1usize..6, 1usize..40).prop_flat_map(|(d, n)| (Just(d), prop::collection::vec(prop::collection::vec(-1e3f64..1e3, d), n)))
}

fn build(d: usize, rows: &[Vec<f64>]) -> EmbeddingMatrix {
    EmbeddingMatrix::from_rows(d, rows.iter().enumerate().map(|(i, r)| (format!("tok{i}"), r.clone()))).unwrap()
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-12)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn text_round_trip((d, rows) in matrices()) {
        let e = build(d, &rows);
        let mut buf = Vec::new();
        e.write_text(&mut buf).unwrap();
        let (back, report) = EmbeddingMatrix::read_text(buf.as_slice(), "buf").unwrap();
        prop_assert!(report.duplicates.is_empty());
        prop_assert_eq!(back.vocab(), e.vocab());
        for i in 0..e.len() {
            for (a, b) in e.column(i).iter().zip(back.column(i)) {
                prop_assert!(close(*a, *b, 1e-6));
            }
        }
    }

    #[test]
    fn binary_round_trip((d, rows) in matrices()) {
        let e = build(d, &rows);
        let mut buf = Vec::new();
        e.write_binary(&mut buf).unwrap();
        let (back, _) = EmbeddingMatrix::read_binary(buf.as_slice(), "buf").unwrap();
        prop_assert_eq!(back.vocab(), e.vocab());
        for i in 0..e.len() {
            for (a, b) in e.column(i).iter().zip(back.column(i)) {
                prop_assert!(close(*a, *b, 1e-6));
            }
        }
    }

    #[test]
    fn lookup_returns_the_file_row((d, rows) in matrices(), picks in prop::collection::vec(any::<prop::sample::Index>(), 100)) {
        let e = build(d, &rows);
        let mut text = format!("{} {d}\n", rows.len());
        for (i, r) in rows.iter().enumerate() {
            let vals: Vec<String> = r.iter().map(|v| v.to_string()).collect();
            text += &format!("tok{i} {}\n", vals.join(" "));
        }
        let (loaded, _) = EmbeddingMatrix::read_text(text.as_bytes(), "inline").unwrap();
        for pick in picks {
            let i = pick.index(rows.len());
            prop_assert_eq!(loaded.lookup(&format!("tok{i}")).unwrap(), rows[i].as_slice());
        }
        prop_assert_eq!(loaded.checksum(), e.checksum());
    }
}

#[test]
fn load_from_disk_in_both_formats() {
    let e = build(3, &[vec![0.5, -1.0, 2.0], vec![1.0, 0.0, -0.25]]);
    let dir = tempfile::tempdir().unwrap();
    let text = dir.path().join("e.txt");
    let bin = dir.path().join("e.bin");
    e.write_text(std::fs::File::create(&text).unwrap()).unwrap();
    e.write_binary(std::fs::File::create(&bin).unwrap()).unwrap();
    assert_eq!(EmbeddingMatrix::load(&text, EmbeddingFormat::Text).unwrap().checksum(), e.checksum());
    assert_eq!(EmbeddingMatrix::load(&bin, EmbeddingFormat::Binary).unwrap().checksum(), e.checksum());
    assert!(EmbeddingMatrix::load(dir.path().join("missing.txt"), EmbeddingFormat::Text).is_err());
}
