//! Score hand-made predictions against a two-sentence story and print the
//! report in each export format.

use std::collections::BTreeMap;

use story_events::corpus::{parse_brat, segment_story, Corpus, EventClass, PredictedMention, TriggerSpan};
use story_events::eval::{evaluate, export_report, MatchCriterion, ReportFormat};

const TEXT: &str = "Ravi said he went home. Sita thought about the mango and took it.";
const ANN: &str = "T1\tCOMMUNICATION 5 9\tsaid\nT2\tMOVEMENT 13 17\twent\n\
                   T3\tCOGNITIVE-MENTAL-STATE 29 36\tthought\nT4\tGENERAL-ACTIVITY 57 61\ttook\n";

fn main() -> story_events::Result<()> {
    let gold = Corpus::new(vec![segment_story(parse_brat("fixture", TEXT, ANN)?)?]);
    let guesses = [
        ("said", EventClass::Communication),
        ("went", EventClass::Communication),
        ("home", EventClass::GeneralActivity),
        ("Sita", EventClass::Others),
        ("thought", EventClass::CognitiveMentalState),
    ];
    let mut preds = BTreeMap::new();
    for (key, s) in gold.all_sentences() {
        let found = guesses
            .iter()
            .filter_map(|&(word, class)| {
                let at = s.offset + s.text.find(word)?;
                Some(PredictedMention {
                    span: TriggerSpan::new(at, at + word.len(), word),
                    event_class: Some(class),
                    score: 1.0,
                })
            })
            .collect::<Vec<_>>();
        preds.insert(key, found);
    }

    for criterion in [MatchCriterion::SPAN_AND_CLASS, MatchCriterion::SPAN] {
        let results = evaluate(&gold, &preds, criterion)?;
        println!("== {criterion}\n{}", export_report(&results, ReportFormat::Text)?);
    }
    let results = evaluate(&gold, &preds, MatchCriterion::SPAN_AND_CLASS)?;
    println!("{}", export_report(&results, ReportFormat::ConfusionCsv)?);
    Ok(())
}
