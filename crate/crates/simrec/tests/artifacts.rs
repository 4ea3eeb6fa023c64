mod common;

use std::fs;

use simrec::artifact::{load_encoder, load_model, save_encoder, save_model};
use simrec::Error;
use simrec_core::corpus::FeatureCombo;

#[test]
fn encoder_round_trip_is_exact() {
    let (model, split, n) = common::fixture_model(FeatureCombo::TAK);
    let dir = tempfile::tempdir().unwrap();
    let fp = split.journals.fingerprint();
    save_encoder(dir.path(), &model.encoder, Some(&fp), None, &[]).unwrap();
    let back = load_encoder(dir.path()).unwrap();
    assert_eq!(back.journal_table.as_deref(), Some(fp.as_str()));
    let texts: Vec<String> = split.test.iter().map(|r| model.compose(&n, r)).collect();
    assert_eq!(back.encoder.encode_texts(&texts).unwrap(), model.encoder.encode_texts(&texts).unwrap());
}

#[test]
fn encoder_load_errors() {
    let (model, _, _) = common::fixture_model(FeatureCombo::TAK);
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(load_encoder(dir.path()), Err(Error::ManifestMismatch(_))));

    save_encoder(dir.path(), &model.encoder, None, None, &[]).unwrap();
    let path = dir.path().join("manifest.json");
    let text = fs::read_to_string(&path).unwrap();
    fs::write(&path, text.replace("\"output_dim\": 16", "\"output_dim\": 17")).unwrap();
    let err = load_encoder(dir.path()).unwrap_err();
    assert_eq!(err.name(), "ManifestMismatch", "{err}");

    fs::write(&path, text.replace("\"format_version\": 1", "\"format_version\": 2")).unwrap();
    assert_eq!(load_encoder(dir.path()).unwrap_err().name(), "ManifestMismatch");
}

#[test]
fn pretrained_adapter_manifest_reports_missing_backend() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("manifest.json"),
        r#"{"format_version":1,"kind":"pretrained_adapter","model_name":"distilroberta-base","max_len":256,
            "output_dim":768,"vocab_size":3,"tensors":[],"fingerprint":"x"}"#,
    )
    .unwrap();
    fs::write(dir.path().join("vocab.txt"), "[PAD]\n[CLS]\n[UNK]\n").unwrap();
    simrec::artifact::write_tensors(&dir.path().join("weights.bin"), &[]).unwrap();
    assert_eq!(load_encoder(dir.path()).unwrap_err().name(), "BackendUnavailable");
}

#[test]
fn model_round_trip_preserves_predictions() {
    for combo in [FeatureCombo::TAK, FeatureCombo::TAKS] {
        let (model, split, n) = common::fixture_model(combo);
        let dir = tempfile::tempdir().unwrap();
        save_model(dir.path(), &model, &n, None).unwrap();
        let art = load_model(dir.path()).unwrap();
        assert_eq!(art.manifest.model_hash, model.fingerprint());
        assert_eq!(art.manifest.architecture, model.head.kind());
        let want = model.rank_records(&n, &split.test, 8).unwrap();
        let got = art.model.rank_records(&art.normalizer, &split.test, 8).unwrap();
        assert_eq!(got, want);
    }
}

#[test]
fn tampered_head_is_rejected() {
    let (model, _, n) = common::fixture_model(FeatureCombo::TAK);
    let dir = tempfile::tempdir().unwrap();
    save_model(dir.path(), &model, &n, None).unwrap();
    let head = dir.path().join("head.bin");
    let mut bytes = fs::read(&head).unwrap();
    let last = bytes.len() - 1;
    bytes[last] ^= 0x40;
    fs::write(&head, bytes).unwrap();
    assert_eq!(load_model(dir.path()).unwrap_err().name(), "ManifestMismatch");
}
