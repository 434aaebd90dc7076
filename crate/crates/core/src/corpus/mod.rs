//! Biography, QA and reasoning samples, plus the external wiki test set.

mod assemble;
mod cpt;
pub mod oracle;
mod tasks;
mod templates;
mod wiki;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Error;
use crate::io::hex_lower;
use crate::persona::KnowledgeClass;

pub use assemble::{
    build_corpus, load_meta, load_sft, load_test, Corpus, CorpusConfig, CorpusMeta, CORPUS_META_FILE, CPT_FILE,
    SFT_FILE, TEST_FILE, WIKI_FILE,
};
pub use cpt::{build_cpt_corpus, CptCorpus, RephraseSchedule, TestSubgroup};
pub use tasks::{
    build_cr_pairing, build_qa, build_reasoning, split_reasoning_qa, ReasoningParams, ANSWER_MARKER,
};
pub use templates::{SentenceKind, TemplatePack};
pub use wiki::{ingest_wiki, WikiQuota, WikiRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Stage {
    #[serde(rename = "CPT")]
    Cpt,
    #[serde(rename = "SFT")]
    Sft,
    #[serde(rename = "TEST")]
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TaskKind {
    QA,
    SR,
    CR,
    NR,
    BIO,
    AUX,
}

impl TaskKind {
    pub const REASONING: [TaskKind; 3] = [TaskKind::SR, TaskKind::CR, TaskKind::NR];

    pub fn is_reasoning(self) -> bool {
        matches!(self, TaskKind::SR | TaskKind::CR | TaskKind::NR)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::QA => "QA",
            TaskKind::SR => "SR",
            TaskKind::CR => "CR",
            TaskKind::NR => "NR",
            TaskKind::BIO => "BIO",
            TaskKind::AUX => "AUX",
        }
    }
}

/// Knowledge type: which of the four attributes a sample is about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum KType {
    B,
    D,
    M,
    U,
    NONE,
}

impl KType {
    pub const ATTRIBUTES: [KType; 4] = [KType::B, KType::D, KType::M, KType::U];

    pub fn as_str(self) -> &'static str {
        match self {
            KType::B => "B",
            KType::D => "D",
            KType::M => "M",
            KType::U => "U",
            KType::NONE => "NONE",
        }
    }
}

impl FromStr for KType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "B" => Ok(KType::B),
            "D" => Ok(KType::D),
            "M" => Ok(KType::M),
            "U" => Ok(KType::U),
            other => Err(Error::InvalidSpec(format!("unknown knowledge type `{other}`"))),
        }
    }
}

/// One of the 16 evaluable tasks (`B_QA` … `U_NR`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TaskId {
    pub ktype: KType,
    pub kind: TaskKind,
}

impl TaskId {
    pub fn new(ktype: KType, kind: TaskKind) -> Self {
        Self { ktype, kind }
    }

    /// All 16 tasks, QA first then reasoning, each in B/D/M/U order.
    pub fn all() -> Vec<TaskId> {
        let mut v: Vec<TaskId> = KType::ATTRIBUTES.iter().map(|&k| TaskId::new(k, TaskKind::QA)).collect();
        v.extend(Self::reasoning());
        v
    }

    pub fn reasoning() -> Vec<TaskId> {
        KType::ATTRIBUTES
            .iter()
            .flat_map(|&k| TaskKind::REASONING.iter().map(move |&r| TaskId::new(k, r)))
            .collect()
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_{}", self.ktype.as_str(), self.kind.as_str())
    }
}

impl FromStr for TaskId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let bad = || Error::UnknownTestSet(s.to_owned());
        let (k, t) = s.split_once('_').ok_or_else(bad)?;
        let ktype: KType = k.parse().map_err(|_| bad())?;
        let kind = match t {
            "QA" => TaskKind::QA,
            "SR" => TaskKind::SR,
            "CR" => TaskKind::CR,
            "NR" => TaskKind::NR,
            _ => return Err(bad()),
        };
        Ok(TaskId::new(ktype, kind))
    }
}

pub const WIKI_TEST_SET: &str = "wiki";

/// One training or evaluation item.
///
/// For `BIO` and `AUX` samples the rendered text is carried in `answer` and
/// `question` is empty. `aliases` lists additional accepted answers and is
/// only populated for external (wiki) questions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    pub stage: Stage,
    pub task_kind: TaskKind,
    pub ktype: KType,
    pub question: String,
    pub answer: String,
    pub cot: String,
    pub person_ids: Vec<u32>,
    pub knowledge_class: KnowledgeClass,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub aliases: Vec<String>,
}

impl Sample {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        stage: Stage,
        task_kind: TaskKind,
        ktype: KType,
        question: String,
        answer: String,
        cot: String,
        person_ids: Vec<u32>,
        knowledge_class: KnowledgeClass,
    ) -> Self {
        let id = sample_id(task_kind, ktype, &question, &answer);
        Self {
            id,
            stage,
            task_kind,
            ktype,
            question,
            answer,
            cot,
            person_ids,
            knowledge_class,
            aliases: Vec::new(),
        }
    }

    pub fn task(&self) -> TaskId {
        TaskId::new(self.ktype, self.task_kind)
    }

    /// `wiki` for external questions, otherwise the task name such as `M_SR`.
    pub fn test_set_id(&self) -> String {
        if self.knowledge_class == KnowledgeClass::External {
            WIKI_TEST_SET.to_owned()
        } else {
            self.task().to_string()
        }
    }

    /// The model input for this item: the question in the fixed
    /// `Question:/Answer:` layout, without the target. Text-only samples
    /// (biographies, auxiliary facts) return their text.
    pub fn context(&self) -> String {
        if self.question.is_empty() {
            self.answer.clone()
        } else {
            format!("Question: {}\nAnswer:", self.question)
        }
    }

    pub fn gold_answers(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.answer.as_str()).chain(self.aliases.iter().map(String::as_str))
    }
}

/// 128-bit content hash of `(task_kind, ktype, question, answer)`, as 32
/// lowercase hex digits. Fields are length-prefixed.
pub fn sample_id(task_kind: TaskKind, ktype: KType, question: &str, answer: &str) -> String {
    let mut h = Sha256::new();
    for part in [task_kind.as_str(), ktype.as_str(), question, answer] {
        h.update((part.len() as u64).to_le_bytes());
        h.update(part.as_bytes());
    }
    hex_lower(&h.finalize()[..16])
}

pub(crate) fn sort_by_id(samples: &mut [Sample]) {
    samples.sort_unstable_by(|a, b| a.id.cmp(&b.id));
}
