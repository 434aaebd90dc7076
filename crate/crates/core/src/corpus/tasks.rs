//! QA and chain-of-thought reasoning renderers, CR pairing and the
//! reasoning/QA split of the known pool.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::oracle::{self, YesNo};
use super::{KType, Sample, Stage, TaskKind};
use crate::error::{Error, Result};
use crate::persona::{KnowledgeClass, Person};
use crate::rng::SeedTree;

pub const ANSWER_MARKER: &str = "The answer is:";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReasoningParams {
    /// `n` in the death-anniversary task.
    pub anniversary_years: i32,
}

impl Default for ReasoningParams {
    fn default() -> Self {
        Self { anniversary_years: 10 }
    }
}

fn stage_for(class: KnowledgeClass) -> Result<Stage> {
    match class {
        KnowledgeClass::Known | KnowledgeClass::Unknown => Ok(Stage::Sft),
        KnowledgeClass::Test => Ok(Stage::Test),
        KnowledgeClass::External => Err(Error::InvalidSpec(
            "synthetic persons cannot be external".into(),
        )),
    }
}

pub fn build_qa(person: &Person, ktype: KType, class: KnowledgeClass) -> Result<Sample> {
    let name = person.full_name();
    let (question, answer) = match ktype {
        KType::B => (format!("When was {name} born?"), person.birth_year.to_string()),
        KType::D => (format!("When did {name} die?"), person.death_year.to_string()),
        KType::M => (format!("What major did {name} study?"), person.major.clone()),
        KType::U => (
            format!("Which university did {name} graduate from?"),
            person.university.clone(),
        ),
        KType::NONE => return Err(Error::InvalidSpec("QA needs an attribute type".into())),
    };
    Ok(Sample::new(
        stage_for(class)?,
        TaskKind::QA,
        ktype,
        question,
        answer,
        String::new(),
        vec![person.id],
        class,
    ))
}

fn ordinal(n: i32) -> String {
    let suffix = match (n % 10, n % 100) {
        (_, 11..=13) => "th",
        (1, _) => "st",
        (2, _) => "nd",
        (3, _) => "rd",
        _ => "th",
    };
    format!("{n}{suffix}")
}

fn not(yes: YesNo) -> &'static str {
    match yes {
        YesNo::Yes => "",
        YesNo::No => " not",
    }
}

fn spelled(word: &str) -> String {
    word.chars()
        .map(|c| c.to_uppercase().collect::<String>())
        .collect::<Vec<_>>()
        .join(", ")
}

/// Renders `(question, rationale without the final line, answer)`.
fn render(
    kind: TaskKind,
    ktype: KType,
    a: &Person,
    b: Option<&Person>,
    params: &ReasoningParams,
) -> Result<(String, String, String)> {
    let an = a.full_name();
    let partner = || b.ok_or_else(|| Error::InvalidSpec("comparative task needs a partner".into()));
    Ok(match (ktype, kind) {
        (KType::B, TaskKind::SR) => {
            let y = a.birth_year;
            let ans = oracle::parity(y)?;
            (
                format!("Is the number of {an}'s birth year an odd number?"),
                format!("{an} was born in {y}. {y} % 2 = {}. So {y} is{} an odd number.", y % 2, not(ans)),
                ans.to_string(),
            )
        }
        (KType::B, TaskKind::CR) => {
            let b = partner()?;
            let bn = b.full_name();
            let (ya, yb) = (a.birth_year, b.birth_year);
            let d = oracle::year_diff(ya, yb)?;
            (
                format!("How many years apart is the birth year between {an} and {bn}?"),
                format!("{an} was born in {ya}. {bn} was born in {yb}. The difference is abs({ya} - {yb}) = {d}."),
                d.to_string(),
            )
        }
        (KType::B, TaskKind::NR) => {
            let y = a.birth_year;
            let [d1, d2, d3, d4] = oracle::year_digits(y)?;
            let m = oracle::mscore(y)?;
            (
                format!("What is the MScore of {an}'s birth year?"),
                format!(
                    "{an} was born in {y}. The four numbers are {d1}, {d2}, {d3} and {d4}. \
                     So the MScore of it is {d1} * {d2} * {d3} * {d4} = {m}."
                ),
                m.to_string(),
            )
        }
        (KType::D, TaskKind::SR) => {
            let y = a.death_year;
            let n = params.anniversary_years;
            let r = oracle::anniversary(y, n)?;
            (
                format!("What year is the {} anniversary of {an}'s death?", ordinal(n)),
                format!("{an} died in {y}. {n} years after it should be {y} + {n} = {r}."),
                r.to_string(),
            )
        }
        (KType::D, TaskKind::CR) => {
            let b = partner()?;
            let bn = b.full_name();
            let (ya, yb) = (a.death_year, b.death_year);
            let first = oracle::died_first((&an, ya), (&bn, yb))?.to_owned();
            (
                format!("Who died first, {an} or {bn}?"),
                format!(
                    "{an} died in {ya}. {bn} died in {yb}. {} is earlier than {}. So {first} died first.",
                    ya.min(yb),
                    ya.max(yb)
                ),
                first,
            )
        }
        (KType::D, TaskKind::NR) => {
            let y = a.death_year;
            let [d1, d2, d3, d4] = oracle::year_digits(y)?;
            let s = oracle::ascore(y)?;
            (
                format!("What is the AScore of {an}'s death year?"),
                format!(
                    "{an} died in {y}. The four numbers are {d1}, {d2}, {d3} and {d4}. \
                     So the AScore of it is {d1} + {d2} + {d3} + {d4} = {s}."
                ),
                s.to_string(),
            )
        }
        (KType::M, TaskKind::SR) => {
            let m = &a.major;
            let f = oracle::field_of(m)?;
            (
                format!("What field does {an}'s major belong to?"),
                format!("{an}'s major is {m}. {m} belongs to {f}."),
                f.to_owned(),
            )
        }
        (KType::M, TaskKind::CR) => {
            let b = partner()?;
            let bn = b.full_name();
            let (ma, mb) = (&a.major, &b.major);
            let (fa, fb) = (oracle::field_of(ma)?, oracle::field_of(mb)?);
            let ans = oracle::same_field(ma, mb)?;
            (
                format!("Do {an} and {bn}'s majors belong to the same field?"),
                format!(
                    "{an}'s major is {ma}. {ma} belongs to {fa}. {bn}'s major is {mb}. {mb} belongs to {fb}. \
                     {fa} and {fb} are{} the same.",
                    not(ans)
                ),
                ans.to_string(),
            )
        }
        (KType::M, TaskKind::NR) => {
            let m = &a.major;
            let word = oracle::checked_words(m)?[0];
            let r = oracle::odd_letters(m)?;
            (
                format!("What is the sequence of odd-positioned letters in the first word of {an}'s major name?"),
                format!(
                    "{an}'s major is {m}. The first word of '{m}' is '{word}'. The spelling of {word} is {}. \
                     The sequence of odd-positioned letters in '{word}' is {r}.",
                    spelled(word)
                ),
                r,
            )
        }
        (KType::U, TaskKind::SR) => {
            let u = &a.university;
            let c = oracle::country_of(u)?;
            (
                format!("In which country did {an} attend university?"),
                format!("{an} was graduated from {u}. {u} is located in {c}."),
                c.to_owned(),
            )
        }
        (KType::U, TaskKind::CR) => {
            let b = partner()?;
            let bn = b.full_name();
            let (ua, ub) = (&a.university, &b.university);
            let ans = oracle::alumni(ua, ub)?;
            (
                format!("Are {an} and {bn} college alumni?"),
                format!(
                    "{an} was graduated from {ua}. {bn} was graduated from {ub}. {ua} and {ub} are{} the same.",
                    not(ans)
                ),
                ans.to_string(),
            )
        }
        (KType::U, TaskKind::NR) => {
            let u = &a.university;
            let words = oracle::checked_words(u)?;
            let r = oracle::first_last(u)?;
            let mut body = format!(
                "{an} was graduated from {u}, which can be splitted into words: {}.",
                words.join(", ")
            );
            for w in &words {
                body.push_str(&format!(
                    " The first and last letters of '{w}' are {}.",
                    oracle::first_last(w)?
                ));
            }
            body.push_str(&format!(" So, the whole sequence is {r}."));
            (
                format!("What is the sequence of the first and last letters of each word in {an}'s university name?"),
                body,
                r,
            )
        }
        (k, t) => {
            return Err(Error::InvalidSpec(format!(
                "{}_{} is not a reasoning task",
                k.as_str(),
                t.as_str()
            )))
        }
    })
}

/// Builds one chain-of-thought sample. The rationale ends with
/// `"The answer is: " + answer`.
pub fn build_reasoning(
    kind: TaskKind,
    ktype: KType,
    a: &Person,
    b: Option<&Person>,
    params: &ReasoningParams,
    classes: &HashMap<u32, KnowledgeClass>,
) -> Result<Sample> {
    match (kind, b) {
        (TaskKind::CR, None) => {
            return Err(Error::InvalidSpec("CR tasks need a second person".into()))
        }
        (TaskKind::SR | TaskKind::NR, Some(_)) => {
            return Err(Error::InvalidSpec(format!(
                "{} tasks take a single person",
                kind.as_str()
            )))
        }
        _ => {}
    }
    let class_of = |p: &Person| {
        classes
            .get(&p.id)
            .copied()
            .ok_or_else(|| Error::InvalidSpec(format!("person {} is in no pool", p.id)))
    };
    let class = class_of(a)?;
    let mut ids = vec![a.id];
    if let Some(b) = b {
        if b.id == a.id {
            return Err(Error::InvalidSpec("CR partner must differ from the primary".into()));
        }
        if class_of(b)? != class {
            return Err(Error::MixedPool(a.id, b.id));
        }
        ids.push(b.id);
    }
    let (question, body, answer) = render(kind, ktype, a, b, params)?;
    let cot = format!("{body}\n{ANSWER_MARKER} {answer}");
    Ok(Sample::new(stage_for(class)?, kind, ktype, question, answer, cot, ids, class))
}

/// Smallest pool for which the M/U YES-rate band is enforced.
pub const MIN_BALANCED_POOL: usize = 20;

/// Pairs every person with a partner from the same pool, returned in primary
/// id order.
///
/// Major and university pairings alternate towards a 50/50 YES/NO split and
/// fail if the final YES rate leaves `[0.45, 0.55]` although every person
/// had both kinds of partner available. Death pairings never share a death
/// year, since "who died first" would have no answer.
pub fn build_cr_pairing(persons: &[&Person], ktype: KType, seed: u64) -> Result<Vec<(u32, u32)>> {
    if persons.len() < 2 {
        return Err(Error::Infeasible("pairing needs at least two persons".into()));
    }
    let tree = SeedTree::new(seed);
    let mut rng = tree.stream(&format!("cr-pairing/{}", ktype.as_str()));
    let mut order: Vec<usize> = (0..persons.len()).collect();
    order.shuffle(&mut rng);

    let same = |i: usize, j: usize| -> bool {
        let (a, b) = (persons[i], persons[j]);
        match ktype {
            KType::M => oracle::field_of(&a.major).ok() == oracle::field_of(&b.major).ok(),
            KType::U => a.university == b.university,
            KType::D => a.death_year == b.death_year,
            _ => false,
        }
    };

    let mut pairs = Vec::with_capacity(persons.len());
    let (mut yes, mut no, mut forced) = (0usize, 0usize, 0usize);
    for &i in &order {
        let others = (0..persons.len()).filter(|&j| j != i);
        let partner = match ktype {
            KType::B => {
                let cands: Vec<usize> = others.collect();
                *cands.choose(&mut rng).unwrap()
            }
            KType::D => {
                let cands: Vec<usize> = others.filter(|&j| !same(i, j)).collect();
                *cands.choose(&mut rng).ok_or_else(|| {
                    Error::Infeasible(format!(
                        "no partner with a different death year for person {}",
                        persons[i].id
                    ))
                })?
            }
            KType::M | KType::U => {
                let (pos, neg): (Vec<usize>, Vec<usize>) = others.partition(|&j| same(i, j));
                let want_yes = yes <= no;
                forced += usize::from(if want_yes { pos.is_empty() } else { neg.is_empty() });
                let pick = match (want_yes, pos.is_empty(), neg.is_empty()) {
                    (true, false, _) | (false, false, true) => pos.choose(&mut rng),
                    _ => neg.choose(&mut rng),
                };
                let j = *pick.unwrap();
                if same(i, j) {
                    yes += 1;
                } else {
                    no += 1;
                }
                j
            }
            KType::NONE => return Err(Error::InvalidSpec("pairing needs an attribute type".into())),
        };
        pairs.push((persons[i].id, persons[partner].id));
    }

    // Balance is only guaranteed when every person had a partner of the
    // wanted kind; tiny or skewed pools fall back to whatever exists.
    if matches!(ktype, KType::M | KType::U) && forced == 0 && persons.len() >= MIN_BALANCED_POOL {
        let rate = yes as f64 / persons.len() as f64;
        if !(0.45..=0.55).contains(&rate) {
            return Err(Error::Infeasible(format!(
                "YES rate {rate:.3} outside [0.45, 0.55] for {} persons",
                persons.len()
            )));
        }
    }
    pairs.sort_unstable();
    Ok(pairs)
}

/// Deterministic 80/20 split of the known pool into reasoning and QA persons.
pub fn split_reasoning_qa(known_ids: &[u32], seed: u64) -> Result<(Vec<u32>, Vec<u32>)> {
    let n = known_ids.len();
    if n < 5 {
        return Err(Error::Range(format!("reasoning/QA split needs at least 5 ids, got {n}")));
    }
    let mut sorted = known_ids.to_vec();
    sorted.sort_unstable();
    let shuffled = SeedTree::new(seed).shuffled("reasoning-qa-split", 0, &sorted);
    let n_reasoning = (8 * n + 5) / 10;
    let mut reasoning = shuffled[..n_reasoning].to_vec();
    let mut qa = shuffled[n_reasoning..].to_vec();
    reasoning.sort_unstable();
    qa.sort_unstable();
    Ok((reasoning, qa))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::persona::Gender;

    fn person(id: u32, first: &str, last: &str, birth: i32, death: i32, major: &str, univ: &str) -> Person {
        Person {
            id,
            first_name: first.into(),
            gender: Gender::M,
            last_name: last.into(),
            birth_year: birth,
            death_year: death,
            major: major.into(),
            university: univ.into(),
        }
    }

    fn hsiao() -> Person {
        person(0, "Darreus", "Hsiao", 1974, 2017, "Dentistry", "Zhejiang University")
    }

    fn cheung() -> Person {
        person(1, "Aydn", "Cheung", 1858, 1919, "Nursing", "Kyoto University")
    }

    fn classes(ids: &[u32]) -> HashMap<u32, KnowledgeClass> {
        ids.iter().map(|&i| (i, KnowledgeClass::Known)).collect()
    }

    #[test]
    fn qa_templates() {
        let p = hsiao();
        let s = build_qa(&p, KType::M, KnowledgeClass::Known).unwrap();
        assert_eq!(s.question, "What major did Darreus Hsiao study?");
        assert_eq!(s.answer, "Dentistry");
        let b = build_qa(&p, KType::B, KnowledgeClass::Known).unwrap();
        assert_eq!(b.question, "When was Darreus Hsiao born?");
        assert_eq!(b.answer, "1974");
        assert_eq!(build_qa(&p, KType::D, KnowledgeClass::Known).unwrap().question, "When did Darreus Hsiao die?");
        assert_eq!(
            build_qa(&p, KType::U, KnowledgeClass::Known).unwrap().question,
            "Which university did Darreus Hsiao graduate from?"
        );
        assert_eq!(build_qa(&p, KType::M, KnowledgeClass::Known).unwrap().id, s.id);
        assert_eq!(build_qa(&p, KType::M, KnowledgeClass::Test).unwrap().stage, Stage::Test);
    }

    #[test]
    fn reasoning_matches_table_examples() {
        let (a, b) = (hsiao(), cheung());
        let c = classes(&[0, 1]);
        let p = ReasoningParams::default();
        let get = |k, t, partner: Option<&Person>| build_reasoning(t, k, &a, partner, &p, &c).unwrap();

        let s = get(KType::M, TaskKind::NR, None);
        assert_eq!(s.answer, "DNITY");
        assert_eq!(
            s.cot,
            "Darreus Hsiao's major is Dentistry. The first word of 'Dentistry' is 'Dentistry'. \
             The spelling of Dentistry is D, E, N, T, I, S, T, R, Y. The sequence of odd-positioned \
             letters in 'Dentistry' is DNITY.\nThe answer is: DNITY"
        );
        let s = get(KType::B, TaskKind::CR, Some(&b));
        assert_eq!(s.answer, "116");
        assert_eq!(
            s.cot,
            "Darreus Hsiao was born in 1974. Aydn Cheung was born in 1858. The difference is \
             abs(1974 - 1858) = 116.\nThe answer is: 116"
        );
        assert_eq!(s.person_ids, vec![0, 1]);
        assert_eq!(get(KType::U, TaskKind::SR, None).answer, "China");
        let s = get(KType::M, TaskKind::SR, None);
        assert_eq!(s.question, "What field does Darreus Hsiao's major belong to?");
        assert_eq!(s.cot, "Darreus Hsiao's major is Dentistry. Dentistry belongs to Medicine.\nThe answer is: Medicine");
        let s = get(KType::M, TaskKind::CR, Some(&b));
        assert_eq!(s.answer, "YES");
        assert!(s.cot.contains("Medicine and Medicine are the same."));
        let s = get(KType::B, TaskKind::SR, None);
        assert_eq!(s.answer, "NO");
        assert!(s.cot.starts_with("Darreus Hsiao was born in 1974. 1974 % 2 = 0. So 1974 is not an odd number."));
        let s = get(KType::B, TaskKind::NR, None);
        assert!(s.cot.contains("So the MScore of it is 1 * 9 * 7 * 4 = 252."));
        let s = get(KType::D, TaskKind::SR, None);
        assert_eq!(s.question, "What year is the 10th anniversary of Darreus Hsiao's death?");
        assert!(s.cot.contains("10 years after it should be 2017 + 10 = 2027."));
        let s = get(KType::D, TaskKind::CR, Some(&b));
        assert_eq!(s.answer, "Aydn Cheung");
        assert!(s.cot.contains("1919 is earlier than 2017. So Aydn Cheung died first."));
        let s = get(KType::D, TaskKind::NR, None);
        assert!(s.cot.contains("So the AScore of it is 2 + 0 + 1 + 7 = 10."));
        let s = get(KType::U, TaskKind::CR, Some(&b));
        assert_eq!(s.answer, "NO");
        assert!(s.cot.contains("Zhejiang University and Kyoto University are not the same."));
        let s = get(KType::U, TaskKind::NR, None);
        assert_eq!(
            s.cot,
            "Darreus Hsiao was graduated from Zhejiang University, which can be splitted into words: \
             Zhejiang, University. The first and last letters of 'Zhejiang' are ZG. The first and last \
             letters of 'University' are UY. So, the whole sequence is ZGUY.\nThe answer is: ZGUY"
        );
    }

    #[test]
    fn arity_and_pool_errors() {
        let (a, b) = (hsiao(), cheung());
        let p = ReasoningParams::default();
        let c = classes(&[0, 1]);
        assert!(build_reasoning(TaskKind::CR, KType::B, &a, None, &p, &c).is_err());
        assert!(build_reasoning(TaskKind::SR, KType::B, &a, Some(&b), &p, &c).is_err());
        assert!(build_reasoning(TaskKind::QA, KType::B, &a, None, &p, &c).is_err());
        let mut mixed = c.clone();
        mixed.insert(1, KnowledgeClass::Unknown);
        assert!(matches!(
            build_reasoning(TaskKind::CR, KType::B, &a, Some(&b), &p, &mixed),
            Err(Error::MixedPool(0, 1))
        ));
    }

    #[test]
    fn ordinals() {
        let got: Vec<String> = [1, 2, 3, 4, 10, 11, 12, 13, 21, 22, 23, 101, 111].iter().map(|&n| ordinal(n)).collect();
        assert_eq!(
            got,
            ["1st", "2nd", "3rd", "4th", "10th", "11th", "12th", "13th", "21st", "22nd", "23rd", "101st", "111th"]
        );
    }

    #[test]
    fn minimal_pairing_is_mutual() {
        let (a, b) = (hsiao(), cheung());
        let pairs = build_cr_pairing(&[&a, &b], KType::B, 1).unwrap();
        assert_eq!(pairs, vec![(0, 1), (1, 0)]);
        assert!(build_cr_pairing(&[&a], KType::B, 1).is_err());
    }

    #[test]
    fn death_pairing_rejects_ties() {
        let a = hsiao();
        let mut b = cheung();
        b.death_year = a.death_year;
        assert!(matches!(build_cr_pairing(&[&a, &b], KType::D, 1), Err(Error::Infeasible(_))));
    }

    #[test]
    fn split_rounding() {
        let (r, q) = split_reasoning_qa(&[1, 2, 3, 4, 5], 9).unwrap();
        assert_eq!((r.len(), q.len()), (4, 1));
        let ids: Vec<u32> = (0..1000).collect();
        let (r, q) = split_reasoning_qa(&ids, 9).unwrap();
        assert_eq!((r.len(), q.len()), (800, 200));
        assert!(split_reasoning_qa(&[1, 2, 3, 4], 9).is_err());
    }
}
