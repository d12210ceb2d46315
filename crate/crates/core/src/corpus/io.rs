use std::fs;
use std::path::{Path, PathBuf};

use super::{parse_brat, segment_story, write_brat, Corpus, Source, Story};
use crate::error::{Error, Result};

/// Every `.txt` file under `dir` (recursively), sorted by path.
pub fn text_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        let entries = fs::read_dir(&d).map_err(|e| Error::io(&d, e))?;
        for entry in entries {
            let entry = entry.map_err(|e| Error::io(&d, e))?;
            let path = entry.path();
            if path.is_dir() {
                stack.push(path);
            } else if path.extension().is_some_and(|e| e == "txt") {
                files.push(path);
            }
        }
    }
    files.sort();
    Ok(files)
}

pub fn story_id(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Parse one `.txt` file and its sibling `.ann` (absent means no mentions).
pub fn read_brat_file(txt: &Path) -> Result<Story> {
    let text = fs::read_to_string(txt).map_err(|e| Error::io(txt, e))?;
    let ann_path = txt.with_extension("ann");
    let ann = if ann_path.exists() {
        fs::read_to_string(&ann_path).map_err(|e| Error::io(&ann_path, e))?
    } else {
        String::new()
    };
    let mut story = parse_brat(&story_id(txt), &text, &ann).map_err(|e| e.in_file(&ann_path))?;
    story.source = Source::infer(txt);
    Ok(story)
}

/// Load, segment and align every story in a BRAT directory. Split manifests
/// (`train.txt`/`dev.txt`/`test.txt`) at the top level are not stories and
/// are skipped.
pub fn load_brat_dir(dir: &Path) -> Result<Corpus> {
    let mut stories = Vec::new();
    for txt in text_files(dir)? {
        if is_manifest(dir, &txt) {
            continue;
        }
        let story = read_brat_file(&txt)?;
        stories.push(segment_story(story).map_err(|e| e.in_file(&txt))?);
    }
    Ok(Corpus::new(stories))
}

pub(crate) fn is_manifest(root: &Path, path: &Path) -> bool {
    path.parent() == Some(root) && matches!(path.file_stem().and_then(|s| s.to_str()), Some("train" | "dev" | "test"))
}

/// Write one `.txt`/`.ann` pair per story; returns the written paths.
pub fn write_brat_dir(stories: &[Story], dir: &Path) -> Result<Vec<(PathBuf, PathBuf)>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut out = Vec::new();
    for story in stories {
        let (text, ann) = write_brat(story);
        let txt = dir.join(format!("{}.txt", story.id));
        let annp = dir.join(format!("{}.ann", story.id));
        fs::write(&txt, text).map_err(|e| Error::io(&txt, e))?;
        fs::write(&annp, ann).map_err(|e| Error::io(&annp, e))?;
        out.push((txt, annp));
    }
    Ok(out)
}
