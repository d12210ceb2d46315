mod common;

use std::fs;
use std::process::Command;

use common::{prompt_config, split_synthetic, tagger_config, write_brat_corpus};
use story_events::augment::{read_manifest, MANIFEST_FILE};
use story_events::cli::{
    backbone_registry, cmd_augment, cmd_eval, cmd_ingest, cmd_predict, cmd_stats, cmd_sweep, cmd_train, cmd_validate,
    evaluate_and_report, read_corpus, read_jsonl_corpus, AugmentOutcome, AugmentStep, RunConfig, ECHO_FILE,
};
use story_events::corpus::synthetic::synthetic_unlabeled;
use story_events::corpus::{load_brat_dir, read_jsonl, write_brat_dir, Corpus, PredictedMention, Provenance, Split};
use story_events::eval::{EvalResults, MatchCriterion};
use story_events::Error;

#[test]
fn ingest_of_an_empty_directory_gives_empty_jsonl() {
    let raw = tempfile::tempdir().unwrap();
    let out = tempfile::tempdir().unwrap();
    let s = cmd_ingest(raw.path(), out.path()).unwrap();
    assert_eq!((s.stories, s.mentions), (0, 0));
    assert_eq!(fs::read_to_string(&s.jsonl).unwrap(), "");
}

#[test]
fn ingest_preserves_every_mention_and_split() {
    let corpus = split_synthetic(5, 4, 1);
    let raw = tempfile::tempdir().unwrap();
    write_brat_corpus(&corpus, raw.path());
    let out = tempfile::tempdir().unwrap();
    let s = cmd_ingest(raw.path(), out.path()).unwrap();
    assert_eq!(s.mentions, corpus.num_mentions());
    let back = read_jsonl_corpus(&s.jsonl).unwrap();
    assert_eq!(back.split, corpus.split);
    assert_eq!(back.num_mentions(), corpus.num_mentions());
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(&s.report).unwrap()).unwrap();
    assert_eq!(report["errors"].as_array().unwrap().len(), 0);
}

#[test]
fn corrupted_annotation_aborts_ingest_with_file_and_line() {
    let corpus = split_synthetic(2, 3, 2);
    let raw = tempfile::tempdir().unwrap();
    write_brat_dir(&corpus.stories, raw.path()).unwrap();
    let bad = raw.path().join(format!("{}.ann", corpus.stories[1].id));
    let mut ann = fs::read_to_string(&bad).unwrap();
    ann.push_str("T99\tMOVEMENT 0 4\tnope\n");
    fs::write(&bad, &ann).unwrap();
    let line = ann.lines().count();
    let out = tempfile::tempdir().unwrap();
    match cmd_ingest(raw.path(), out.path()) {
        Err(Error::Validation(problems)) => {
            assert_eq!(problems.len(), 1);
            assert!(problems[0].contains(&format!("{}:{line}", bad.display())), "{}", problems[0]);
        }
        other => panic!("expected a validation error, got {other:?}"),
    }
    assert!(!out.path().join("corpus.jsonl").exists());
    assert_eq!(cmd_validate(raw.path()).unwrap().len(), 1);
}

#[test]
fn binary_exits_nonzero_on_a_corrupted_annotation() {
    let corpus = split_synthetic(1, 2, 3);
    let raw = tempfile::tempdir().unwrap();
    write_brat_dir(&corpus.stories, raw.path()).unwrap();
    fs::write(raw.path().join(format!("{}.ann", corpus.stories[0].id)), "T1\tNOT_A_CLASS 0 3\tabc\n").unwrap();
    let out = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_story-events");
    for args in [vec!["validate"], vec!["ingest"]] {
        let status = Command::new(bin).args(&args).arg(raw.path()).arg("--out").arg(out.path()).output().unwrap();
        assert!(!status.status.success(), "{args:?}");
        let text = String::from_utf8_lossy(&status.stdout).to_string() + &String::from_utf8_lossy(&status.stderr);
        assert!(text.contains(".ann:1"), "{text}");
    }
    let ok = tempfile::tempdir().unwrap();
    write_brat_dir(&corpus.stories, ok.path()).unwrap();
    let status = Command::new(bin).arg("validate").arg(ok.path()).status().unwrap();
    assert!(status.success());
}

#[test]
fn stats_tables_parse_and_agree() {
    let corpus = split_synthetic(5, 3, 4);
    let out = tempfile::tempdir().unwrap();
    let stats = cmd_stats(&corpus, out.path()).unwrap();
    let reports = out.path().join("reports");
    let mut classes = csv::Reader::from_path(reports.join("classes.csv")).unwrap();
    let mut total = 0;
    for row in classes.records() {
        let row = row.unwrap();
        let n: usize = row[1].parse().unwrap();
        let parts: usize = (2..5).map(|i| row[i].parse::<usize>().unwrap()).sum();
        assert_eq!(n, parts);
        total += n;
    }
    assert_eq!(total, stats.total_events);
    let sources = csv::Reader::from_path(reports.join("sources.csv")).unwrap().into_records().count();
    assert_eq!(sources, stats.per_source.len());
    let top: Vec<_> = csv::Reader::from_path(reports.join("top_triggers.csv"))
        .unwrap()
        .into_records()
        .map(|r| r.unwrap()[0].to_string())
        .collect();
    assert_eq!(top[0], stats.top_triggers[0].surface);
}

#[test]
fn one_story_stats_have_consistent_averages() {
    let corpus = Corpus::new(split_synthetic(1, 4, 5).stories);
    let out = tempfile::tempdir().unwrap();
    let s = cmd_stats(&corpus, out.path()).unwrap();
    assert_eq!(s.avg_tokens_per_story, s.total_tokens as f64);
    assert_eq!(s.avg_events_per_story, s.total_events as f64);
    assert_eq!(s.avg_tokens_per_sentence, s.total_tokens as f64 / s.total_sentences as f64);
}

#[test]
fn training_without_a_split_is_an_error() {
    let corpus = Corpus::new(split_synthetic(3, 2, 6).stories);
    let raw = tempfile::tempdir().unwrap();
    write_brat_dir(&corpus.stories, raw.path()).unwrap();
    let out = tempfile::tempdir().unwrap();
    let cfg = prompt_config(raw.path(), out.path());
    assert!(matches!(cmd_train(&cfg), Err(Error::Split(_))));
}

#[test]
fn train_eval_predict_round_trip_for_both_families() {
    let corpus = split_synthetic(5, 3, 7);
    let raw = tempfile::tempdir().unwrap();
    write_brat_corpus(&corpus, raw.path());
    for tagger in [false, true] {
        let out = tempfile::tempdir().unwrap();
        let cfg = if tagger { tagger_config(raw.path(), out.path()) } else { prompt_config(raw.path(), out.path()) };
        let t = cmd_train(&cfg).unwrap();
        assert!(t.checkpoint.exists());
        assert_eq!(t.log.epoch_losses.len(), 2);
        for f in ["logs/train_log.json", "logs/losses.csv", ECHO_FILE] {
            assert!(out.path().join(f).exists(), "{f}");
        }

        let e = cmd_eval(&cfg).unwrap();
        for stem in ["eval", "eval_detection", "eval_classification"] {
            let json = fs::read_to_string(out.path().join(format!("reports/{stem}.json"))).unwrap();
            let _: EvalResults = serde_json::from_str(&json).unwrap();
        }
        assert_eq!(e.detection.criterion, MatchCriterion::SPAN);
        assert_eq!(e.classification.criterion, MatchCriterion::SPAN_AND_CLASS);

        let input = tempfile::tempdir().unwrap();
        write_brat_dir(&synthetic_unlabeled(2, 3, 8), input.path()).unwrap();
        let p = cmd_predict(&cfg, input.path()).unwrap();
        assert_eq!(p.stories, 2);
        let records = read_jsonl(fs::read_to_string(&p.jsonl).unwrap().as_bytes()).unwrap();
        assert!(records.iter().flat_map(|r| r.predicted_mentions.iter().flatten()).all(|m| m.score.is_some()));
        let brat = p.brat_dir.expect("classify models write BRAT");
        let reparsed = load_brat_dir(&brat).unwrap();
        assert_eq!(reparsed.stories.len(), 2);
        assert!(cmd_validate(&brat).unwrap().is_empty());
    }
}

#[test]
fn empty_prediction_input_gives_empty_outputs() {
    let corpus = split_synthetic(5, 2, 9);
    let raw = tempfile::tempdir().unwrap();
    write_brat_corpus(&corpus, raw.path());
    let out = tempfile::tempdir().unwrap();
    let cfg = prompt_config(raw.path(), out.path());
    cmd_train(&cfg).unwrap();
    let empty = tempfile::tempdir().unwrap();
    let p = cmd_predict(&cfg, empty.path()).unwrap();
    assert_eq!((p.stories, p.mentions), (0, 0));
    assert_eq!(fs::read_to_string(&p.jsonl).unwrap(), "");
    assert_eq!(fs::read_dir(p.brat_dir.unwrap()).unwrap().count(), 0);
}

#[test]
fn gold_as_predictions_scores_one_everywhere() {
    let corpus = split_synthetic(5, 4, 10);
    let preds = corpus.all_sentences().map(|(k, s)| (k, s.gold().map(PredictedMention::from_gold).collect())).collect();
    let dir = tempfile::tempdir().unwrap();
    let e = evaluate_and_report(&corpus, &preds, MatchCriterion::SPAN_AND_CLASS, dir.path()).unwrap();
    for r in [&e.configured, &e.detection, &e.classification] {
        assert_eq!((r.overall.precision, r.overall.recall, r.overall.f1), (1.0, 1.0, 1.0));
        assert_eq!(r.detection.f1, 1.0);
    }
    let present: Vec<_> = e.classification.per_class.values().filter(|m| m.tp > 0).collect();
    assert!(!present.is_empty());
    assert!(present.iter().all(|m| m.f1 == 1.0));
}

#[test]
fn augment_loop_runs_end_to_end() {
    let corpus = split_synthetic(5, 3, 11);
    let raw = tempfile::tempdir().unwrap();
    write_brat_corpus(&corpus, raw.path());
    let unlabeled = tempfile::tempdir().unwrap();
    write_brat_dir(&synthetic_unlabeled(4, 3, 12), unlabeled.path()).unwrap();
    let out = tempfile::tempdir().unwrap();
    let mut cfg = prompt_config(raw.path(), out.path());
    cfg.set("augment.unlabeled", unlabeled.path().to_str().unwrap()).unwrap();
    cfg.set("augment.sample_sizes", "2,4").unwrap();
    cmd_train(&cfg).unwrap();

    let AugmentOutcome::Labelled { stories, failures, jsonl, .. } = cmd_augment(&cfg, AugmentStep::Label).unwrap()
    else {
        panic!("label step")
    };
    assert_eq!((stories, failures.len()), (4, 0));
    let synthetic = read_jsonl_corpus(&jsonl).unwrap();
    assert!(synthetic.stories.iter().all(|s| s.provenance == Provenance::Synthetic));

    let AugmentOutcome::Exported(batch) = cmd_augment(&cfg, AugmentStep::Export).unwrap() else {
        panic!("export step")
    };
    let review = out.path().join("review");
    assert!(review.join(MANIFEST_FILE).exists());
    assert_eq!(read_manifest(&review).unwrap().len(), batch.story_ids.len());

    let AugmentOutcome::Merged { reviewed, jsonl } = cmd_augment(&cfg, AugmentStep::Merge).unwrap() else {
        panic!("merge step")
    };
    assert_eq!(reviewed, 4);
    let merged = read_jsonl_corpus(&jsonl).unwrap();
    assert!(merged.stories.iter().all(|s| s.provenance == Provenance::HumanReviewed));

    let AugmentOutcome::Benchmarked(report) = cmd_augment(&cfg, AugmentStep::Benchmark).unwrap() else {
        panic!("benchmark step")
    };
    let labels: Vec<_> = report.rows.iter().map(|r| r.label.as_str()).collect();
    assert_eq!(labels, ["original", "synthetic-2", "synthetic-4"]);
    assert_eq!(report.test_ids, corpus.ids_in(Split::Test));
    for f in ["comparison.json", "detection.txt", "classification.txt"] {
        assert!(out.path().join("reports/benchmark").join(f).exists(), "{f}");
    }
}

#[test]
fn benchmark_aborts_when_a_test_story_is_in_the_pool() {
    let corpus = split_synthetic(5, 2, 13);
    let raw = tempfile::tempdir().unwrap();
    write_brat_corpus(&corpus, raw.path());
    let out = tempfile::tempdir().unwrap();
    let mut cfg = prompt_config(raw.path(), out.path());
    // the pool is the base corpus itself, test stories included
    let pool_file = out.path().join("pool.jsonl");
    let records = story_events::corpus::corpus_records(&read_corpus(raw.path()).unwrap());
    let mut buf = Vec::new();
    story_events::corpus::write_jsonl(&mut buf, &records).unwrap();
    fs::write(&pool_file, buf).unwrap();
    cfg.set("augment.pool", pool_file.to_str().unwrap()).unwrap();
    assert!(matches!(cmd_augment(&cfg, AugmentStep::Benchmark), Err(Error::Data(_))));
}

#[test]
fn sweep_emits_one_row_per_value_and_rejects_duplicates() {
    let corpus = split_synthetic(5, 2, 14);
    let raw = tempfile::tempdir().unwrap();
    write_brat_corpus(&corpus, raw.path());
    let out = tempfile::tempdir().unwrap();
    let cfg = prompt_config(raw.path(), out.path());
    let values = vec!["1e-3".to_string(), "5e-4".to_string()];
    let rows = cmd_sweep(&cfg, "prompt.learning_rate", &values).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.split == Split::Test));
    let table = csv::Reader::from_path(out.path().join("reports/sweep.csv")).unwrap().into_records().count();
    assert_eq!(table, 2);

    let dup = vec!["1e-3".to_string(), "0.001".to_string()];
    assert!(matches!(cmd_sweep(&cfg, "prompt.learning_rate", &dup), Err(Error::Config(_))));
    assert!(matches!(cmd_sweep(&cfg, "prompt.no_such_key", &values), Err(Error::Config(_))));
}

#[test]
fn shipped_configs_parse_and_name_known_backbones() {
    let root = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(&root).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_none_or(|e| e != "cfg") {
            continue;
        }
        let mut cfg = RunConfig::from_file(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        cfg.validate().unwrap();
        // registry paths are relative to the repo root
        if let Some(reg) = &cfg.backbone_registry {
            cfg.backbone_registry = Some(root.join("..").join(reg));
        }
        backbone_registry(&cfg).unwrap().get(&cfg.prompt.backbone).unwrap();
        seen += 1;
    }
    assert!(seen >= 4);
}
