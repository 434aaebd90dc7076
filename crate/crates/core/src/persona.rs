//! Synthetic persons, their four attributes, and the known/test/unknown split.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SeedTree;

pub const MIN_BIRTH_YEAR: i32 = 1800;
pub const MAX_BIRTH_YEAR: i32 = 1980;
pub const MIN_LIFESPAN: i32 = 30;
pub const MAX_LIFESPAN: i32 = 100;
pub const LATEST_DEATH_YEAR: i32 = 2020;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Gender {
    F,
    M,
}

impl Gender {
    pub fn pronoun(self) -> &'static str {
        match self {
            Gender::F => "she",
            Gender::M => "he",
        }
    }

    pub fn possessive(self) -> &'static str {
        match self {
            Gender::F => "her",
            Gender::M => "his",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Person {
    pub id: u32,
    pub first_name: String,
    pub gender: Gender,
    pub last_name: String,
    pub birth_year: i32,
    pub death_year: i32,
    pub major: String,
    pub university: String,
}

impl Person {
    pub fn full_name(&self) -> String {
        format!("{} {}", self.first_name, self.last_name)
    }
}

/// First-name pools per gender plus a surname pool, one name per line on disk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NamePools {
    pub female: Vec<String>,
    pub male: Vec<String>,
    pub surnames: Vec<String>,
}

const FEMALE_FILE: &str = "first_female.txt";
const MALE_FILE: &str = "first_male.txt";
const SURNAME_FILE: &str = "surnames.txt";

impl NamePools {
    /// The bundled pools: 1,500 female and 1,500 male English first names and
    /// 250 romanized Chinese surnames.
    pub fn bundled() -> Self {
        Self {
            female: parse_lines(include_str!("../data/names/first_female.txt")),
            male: parse_lines(include_str!("../data/names/first_male.txt")),
            surnames: parse_lines(include_str!("../data/names/surnames.txt")),
        }
    }

    pub fn from_dir(dir: &Path) -> Result<Self> {
        let read = |f: &str| -> Result<Vec<String>> {
            let p = dir.join(f);
            let text = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
            Ok(parse_lines(&text))
        };
        Ok(Self {
            female: read(FEMALE_FILE)?,
            male: read(MALE_FILE)?,
            surnames: read(SURNAME_FILE)?,
        })
    }

    pub fn first_name_count(&self) -> usize {
        self.female.len() + self.male.len()
    }
}

fn parse_lines(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_owned)
        .collect()
}

/// Generates `n` persons. Person `i` depends only on `(seed, i, pools)`, so a
/// larger population extends a smaller one without changing it.
///
/// Even ids are female and odd ids male, which gives an exact 50/50 split
/// (the extra person for odd `n` is female). Every person gets a distinct
/// first name; surnames are dealt round-robin from a seeded shuffle.
pub fn generate_population(seed: u64, n: usize, pools: &NamePools) -> Result<Vec<Person>> {
    if n == 0 {
        return Err(Error::Range("population size must be positive".into()));
    }
    let need_f = n.div_ceil(2);
    let need_m = n / 2;
    if pools.female.len() < need_f || pools.male.len() < need_m {
        return Err(Error::PoolExhausted(format!(
            "{n} persons need {need_f} female and {need_m} male first names, pools have {} and {}",
            pools.female.len(),
            pools.male.len()
        )));
    }
    if pools.surnames.is_empty() {
        return Err(Error::PoolExhausted("surname pool is empty".into()));
    }

    let tree = SeedTree::new(seed);
    let female = tree.shuffled("names/female", 0, &pools.female);
    let male = tree.shuffled("names/male", 0, &pools.male);
    let surnames = tree.shuffled("names/surname", 0, &pools.surnames);
    let majors = majors();
    let universities = universities();

    let mut seen = HashSet::with_capacity(n);
    let mut persons = Vec::with_capacity(n);
    for i in 0..n {
        let (gender, first) = if i % 2 == 0 {
            (Gender::F, &female[i / 2])
        } else {
            (Gender::M, &male[i / 2])
        };
        let last = &surnames[i % surnames.len()];
        let full = format!("{first} {last}");
        if !seen.insert(full.clone()) {
            return Err(Error::PoolExhausted(format!(
                "full name `{full}` would repeat; pools contain duplicate first names"
            )));
        }

        let mut rng = tree.indexed("person/attributes", i as u64);
        let birth_year = rng.gen_range(MIN_BIRTH_YEAR..=MAX_BIRTH_YEAR);
        let death_year = rng.gen_range(
            birth_year + MIN_LIFESPAN..=(birth_year + MAX_LIFESPAN).min(LATEST_DEATH_YEAR),
        );
        let major = majors[rng.gen_range(0..majors.len())];
        let university = universities[rng.gen_range(0..universities.len())];

        persons.push(Person {
            id: i as u32,
            first_name: first.clone(),
            gender,
            last_name: last.clone(),
            birth_year,
            death_year,
            major: major.to_owned(),
            university: university.to_owned(),
        });
    }
    Ok(persons)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KnowledgeClass {
    Known,
    Unknown,
    Test,
    External,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnowledgePools {
    pub known: Vec<u32>,
    pub test: Vec<u32>,
    pub unknown: Vec<u32>,
}

impl KnowledgePools {
    pub fn class_index(&self) -> HashMap<u32, KnowledgeClass> {
        let mut m = HashMap::new();
        for (ids, class) in [
            (&self.known, KnowledgeClass::Known),
            (&self.test, KnowledgeClass::Test),
            (&self.unknown, KnowledgeClass::Unknown),
        ] {
            for &id in ids {
                m.insert(id, class);
            }
        }
        m
    }

    pub fn ids(&self, class: KnowledgeClass) -> &[u32] {
        match class {
            KnowledgeClass::Known => &self.known,
            KnowledgeClass::Test => &self.test,
            KnowledgeClass::Unknown => &self.unknown,
            KnowledgeClass::External => &[],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolSizes {
    pub known: usize,
    pub test: usize,
    pub unknown: usize,
}

impl Default for PoolSizes {
    fn default() -> Self {
        Self {
            known: 1000,
            test: 1000,
            unknown: 1000,
        }
    }
}

/// Contents of `pools.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolsFile {
    pub seed: u64,
    pub sizes: PoolSizes,
    #[serde(flatten)]
    pub pools: KnowledgePools,
}

pub fn split_pools(seed: u64, persons: &[Person], sizes: PoolSizes) -> Result<KnowledgePools> {
    let total = sizes.known + sizes.test + sizes.unknown;
    if total != persons.len() {
        return Err(Error::SizeMismatch(format!(
            "pool sizes {}+{}+{} = {total} do not match population {}",
            sizes.known,
            sizes.test,
            sizes.unknown,
            persons.len()
        )));
    }
    let ids: Vec<u32> = persons.iter().map(|p| p.id).collect();
    let shuffled = SeedTree::new(seed).shuffled("pools", 0, &ids);
    let take = |range: std::ops::Range<usize>| {
        let mut v = shuffled[range].to_vec();
        v.sort_unstable();
        v
    };
    let k = sizes.known;
    let t = k + sizes.test;
    Ok(KnowledgePools {
        known: take(0..k),
        test: take(k..t),
        unknown: take(t..total),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuxKind {
    MajorField,
    UniversityCountry,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuxFact {
    pub kind: AuxKind,
    pub key: String,
    pub value: String,
}

const MAJOR_FIELDS: [(&str, [&str; 5]); 10] = [
    ("Economics", ["Finance", "Investment", "Taxation", "Insurance", "Digital Economy"]),
    (
        "Law",
        ["Intellectual Property", "Criminal Justice", "Sociology", "International Politics", "Diplomacy"],
    ),
    ("Literature", ["Journalism", "Advertising", "English", "French", "Russian"]),
    (
        "History",
        ["Chinese History", "World History", "Museum Studies", "Science History", "Historical Geography"],
    ),
    ("Science", ["Mathematics", "Physics", "Chemistry", "Biology", "Geology"]),
    (
        "Engineering",
        ["Computer Science", "Software Engineering", "Automation", "Architecture", "Electrical Engineering"],
    ),
    ("Medicine", ["Clinical Medicine", "Dentistry", "Pharmacy", "Nursing", "Public Health"]),
    ("Agriculture", ["Agronomy", "Horticulture", "Plant Protection", "Animal Science", "Forestry"]),
    (
        "Management",
        ["Accounting", "Finance Management", "Library Science", "Tourism Management", "Logistics Management"],
    ),
    ("Art", ["Fine Arts", "Music", "Dance", "Art Theory", "Environmental Design"]),
];

const UNIVERSITY_COUNTRIES: [(&str, [&str; 5]); 10] = [
    (
        "United States",
        ["Harvard University", "Stanford University", "Princeton University", "Yale University", "Columbia University"],
    ),
    (
        "United Kingdom",
        [
            "University of Oxford",
            "University of Cambridge",
            "Imperial College London",
            "University College London",
            "University of Manchester",
        ],
    ),
    (
        "Canada",
        ["University of Toronto", "McGill University", "University of Alberta", "McMaster University", "University of Waterloo"],
    ),
    (
        "Australia",
        [
            "University of Melbourne",
            "University of Sydney",
            "University of Queensland",
            "Monash University",
            "Macquarie University",
        ],
    ),
    (
        "Germany",
        [
            "Heidelberg University",
            "RWTH Aachen University",
            "University of Freiburg",
            "University of Hamburg",
            "University of Tübingen",
        ],
    ),
    (
        "France",
        ["Sorbonne University", "University of Paris", "University of Strasbourg", "University of Lyon", "University of Bordeaux"],
    ),
    (
        "China",
        ["Tsinghua University", "Peking University", "Fudan University", "Zhejiang University", "Nanjing University"],
    ),
    (
        "Japan",
        ["Kyoto University", "Osaka University", "Tohoku University", "Nagoya University", "Hokkaido University"],
    ),
    (
        "Singapore",
        [
            "Nanyang Technological University",
            "Singapore Management University",
            "Temasek Polytechnic",
            "Republic Polytechnic",
            "Singapore Polytechnic",
        ],
    ),
    (
        "South Korea",
        ["Seoul National University", "Korea University", "Yonsei University", "Sungkyunkwan University", "Hanyang University"],
    ),
];

fn table(kind: AuxKind) -> &'static [(&'static str, [&'static str; 5]); 10] {
    match kind {
        AuxKind::MajorField => &MAJOR_FIELDS,
        AuxKind::UniversityCountry => &UNIVERSITY_COUNTRIES,
    }
}

pub fn majors() -> Vec<&'static str> {
    MAJOR_FIELDS.iter().flat_map(|(_, m)| m.iter().copied()).collect()
}

pub fn universities() -> Vec<&'static str> {
    UNIVERSITY_COUNTRIES.iter().flat_map(|(_, u)| u.iter().copied()).collect()
}

/// The 100 auxiliary facts: 50 major→field and 50 university→country.
pub fn aux_tables() -> Vec<AuxFact> {
    [AuxKind::MajorField, AuxKind::UniversityCountry]
        .into_iter()
        .flat_map(|kind| {
            table(kind).iter().flat_map(move |(value, keys)| {
                keys.iter().map(move |key| AuxFact {
                    kind,
                    key: (*key).to_owned(),
                    value: (*value).to_owned(),
                })
            })
        })
        .collect()
}

pub fn aux_lookup(kind: AuxKind, key: &str) -> Option<&'static str> {
    table(kind)
        .iter()
        .find(|(_, keys)| keys.contains(&key))
        .map(|(value, _)| *value)
}
