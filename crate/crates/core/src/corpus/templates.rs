use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::persona::Gender;

/// The six sentence families that carry a rephrasable fact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SentenceKind {
    Birth,
    Death,
    Major,
    University,
    AuxMajor,
    AuxUniversity,
}

impl SentenceKind {
    pub const ALL: [SentenceKind; 6] = [
        SentenceKind::Birth,
        SentenceKind::Death,
        SentenceKind::Major,
        SentenceKind::University,
        SentenceKind::AuxMajor,
        SentenceKind::AuxUniversity,
    ];

    pub fn file_name(self) -> &'static str {
        match self {
            SentenceKind::Birth => "birth.txt",
            SentenceKind::Death => "death.txt",
            SentenceKind::Major => "major.txt",
            SentenceKind::University => "university.txt",
            SentenceKind::AuxMajor => "aux_major.txt",
            SentenceKind::AuxUniversity => "aux_university.txt",
        }
    }
}

/// Surface forms per sentence family. Placeholders: `{name}` and `{value}`
/// (both mandatory), `{pronoun}` and `{possessive}` (optional).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplatePack {
    families: [Vec<String>; 6],
}

const PLACEHOLDERS: [&str; 4] = ["{name}", "{value}", "{pronoun}", "{possessive}"];

impl TemplatePack {
    pub fn bundled() -> Self {
        let raw = [
            include_str!("../../data/templates/birth.txt"),
            include_str!("../../data/templates/death.txt"),
            include_str!("../../data/templates/major.txt"),
            include_str!("../../data/templates/university.txt"),
            include_str!("../../data/templates/aux_major.txt"),
            include_str!("../../data/templates/aux_university.txt"),
        ];
        Self::from_texts(raw).expect("bundled templates are valid")
    }

    pub fn from_dir(dir: &Path) -> Result<Self> {
        let mut texts = Vec::with_capacity(6);
        for kind in SentenceKind::ALL {
            let p = dir.join(kind.file_name());
            texts.push(fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?);
        }
        Self::from_texts([&texts[0], &texts[1], &texts[2], &texts[3], &texts[4], &texts[5]])
    }

    fn from_texts(texts: [&str; 6]) -> Result<Self> {
        let mut families: [Vec<String>; 6] = Default::default();
        for (i, text) in texts.iter().enumerate() {
            let kind = SentenceKind::ALL[i];
            let mut lines: Vec<String> = Vec::new();
            for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
                validate(kind, line)?;
                if lines.iter().any(|l| l == line) {
                    return Err(Error::TemplateShortage(format!(
                        "{}: duplicate template `{line}`",
                        kind.file_name()
                    )));
                }
                lines.push(line.to_owned());
            }
            families[i] = lines;
        }
        Ok(Self { families })
    }

    pub fn family(&self, kind: SentenceKind) -> &[String] {
        &self.families[SentenceKind::ALL.iter().position(|&k| k == kind).unwrap()]
    }

    pub fn min_family_len(&self) -> usize {
        self.families.iter().map(Vec::len).min().unwrap_or(0)
    }
}

fn validate(kind: SentenceKind, line: &str) -> Result<()> {
    for required in ["{name}", "{value}"] {
        if !line.contains(required) {
            return Err(Error::TemplateShortage(format!(
                "{}: template `{line}` lacks {required}",
                kind.file_name()
            )));
        }
    }
    let mut rest = line;
    while let Some(start) = rest.find('{') {
        let tail = &rest[start..];
        match PLACEHOLDERS.iter().find(|p| tail.starts_with(**p)) {
            Some(p) => rest = &tail[p.len()..],
            None => {
                return Err(Error::TemplateShortage(format!(
                    "{}: template `{line}` has an unknown placeholder",
                    kind.file_name()
                )))
            }
        }
    }
    Ok(())
}

pub(crate) fn fill(template: &str, name: &str, value: &str, gender: Option<Gender>) -> String {
    let mut s = template.replace("{name}", name).replace("{value}", value);
    if let Some(g) = gender {
        s = s.replace("{pronoun}", g.pronoun()).replace("{possessive}", g.possessive());
    } else {
        s = s.replace("{pronoun}", "it").replace("{possessive}", "its");
    }
    s
}
