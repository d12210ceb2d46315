//! Corrupt a few annotation files on purpose and list what the validator finds.

use std::fs;

use story_events::cli::cmd_validate;
use story_events::corpus::synthetic::synthetic_corpus;
use story_events::corpus::write_brat_dir;

fn main() -> story_events::Result<()> {
    let dir = tempfile::tempdir().map_err(|e| story_events::Error::io("tempdir", e))?;
    let corpus = synthetic_corpus(3, 3, 4);
    write_brat_dir(&corpus.stories, dir.path())?;

    let ids: Vec<&str> = corpus.stories.iter().map(|s| s.id.as_str()).collect();
    // out-of-range offsets, an unknown label and a non-numeric offset
    fs::write(dir.path().join(format!("{}.ann", ids[0])), "T1\tMOVEMENT 0 100000\twent\n").unwrap();
    fs::write(dir.path().join(format!("{}.ann", ids[1])), "T1\tDANCING 0 3\txxx\n").unwrap();
    fs::write(dir.path().join(format!("{}.ann", ids[2])), "T1\tMOVEMENT zero 4\twent\n").unwrap();

    let problems = cmd_validate(dir.path())?;
    for p in &problems {
        println!("{p}");
    }
    println!("{} problem(s)", problems.len());
    Ok(())
}
