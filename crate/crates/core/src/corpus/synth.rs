//! Seeded synthetic corpora with planted evasion behaviour.
//!
//! Every account draws its lifetime, activity and text from the same base
//! distributions. The knobs on [`SynthConfig`] then plant signal along the
//! axes the detection tasks look at: page overlap and vocabulary reuse
//! between parent and child, username mutation, evader activity, and the
//! share of abusive vocabulary in malicious accounts. With every knob at
//! zero, evasion accounts are statistically indistinguishable from the
//! matched controls.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, LogNormal};
use serde::{Deserialize, Serialize};

use super::{Account, Corpus, CorpusError, PairRecord, Revision, SockpuppetRecord};
use crate::time::{Timestamp, DAY, HOUR};

/// 2015-01-01T00:00:00Z
const TIMELINE_START: Timestamp = 1_420_070_400;
const PAGE_UNIVERSE: usize = 4_000;
const TOPICAL_VOCAB: usize = 3_000;
const PERSONAL_VOCAB: usize = 40;
const MAX_DURATION_DAYS: f64 = 180.0;
const MEDIAN_DURATION_DAYS: f64 = 18.0;
const MEDIAN_REVISIONS: f64 = 10.0;
const NULL_IDLE_GAP_DAYS: f64 = 180.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    /// Sockpuppet groups; each one evades with probability `evasion_rate`.
    pub n_groups: usize,
    /// Never-banned accounts with at least one revision.
    pub n_benign: usize,
    /// Banned accounts outside every sockpuppet record.
    pub n_nonevading_malicious: usize,
    pub evasion_rate: f64,
    /// Probability that a child's username is a small edit of its parent's.
    pub username_mutation_rate: f64,
    /// Probability that a child revision lands on a page its parent edited.
    pub page_overlap: f64,
    /// Probability that a child token is drawn from its parent's vocabulary.
    pub vocab_reuse: f64,
    /// Mean idle time between a parent's ban and its child's creation.
    pub idle_gap_days: f64,
    /// Evading parents live longer, edit more and touch more pages, and
    /// swear less, in proportion to this knob.
    pub activity_contrast: f64,
    /// Per-token probability that a malicious account uses abusive vocabulary.
    pub toxicity: f64,
    /// Probability that an evading group also has a second-round child.
    pub second_round_rate: f64,
    /// Span over which group parents are created.
    pub horizon_days: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_groups: 200,
            n_benign: 5_000,
            n_nonevading_malicious: 3_000,
            evasion_rate: 0.9,
            username_mutation_rate: 0.6,
            page_overlap: 0.5,
            vocab_reuse: 0.5,
            idle_gap_days: 5.0,
            activity_contrast: 0.5,
            toxicity: 0.1,
            second_round_rate: 0.2,
            horizon_days: 730.0,
            seed: 7,
        }
    }
}

impl SynthConfig {
    /// Every behavioural knob at zero: evaders look like everyone else.
    ///
    /// The idle gap is also made long. Gaps are exponential, so a long mean
    /// makes the time from a parent's ban to a matched control's creation
    /// follow the same law as the time to the child's.
    pub fn null_control(seed: u64) -> Self {
        Self {
            idle_gap_days: NULL_IDLE_GAP_DAYS,
            username_mutation_rate: 0.0,
            page_overlap: 0.0,
            vocab_reuse: 0.0,
            activity_contrast: 0.0,
            toxicity: 0.0,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        let rates = [
            ("evasion_rate", self.evasion_rate),
            ("username_mutation_rate", self.username_mutation_rate),
            ("page_overlap", self.page_overlap),
            ("vocab_reuse", self.vocab_reuse),
            ("activity_contrast", self.activity_contrast),
            ("toxicity", self.toxicity),
            ("second_round_rate", self.second_round_rate),
        ];
        for (name, value) in rates {
            if !(0.0..=1.0).contains(&value) {
                return Err(CorpusError::InvalidConfig(name));
            }
        }
        if !(self.idle_gap_days.is_finite() && self.idle_gap_days > 0.0) {
            return Err(CorpusError::InvalidConfig("idle_gap_days"));
        }
        if !(self.horizon_days.is_finite() && self.horizon_days > 0.0) {
            return Err(CorpusError::InvalidConfig("horizon_days"));
        }
        Ok(())
    }
}

/// A generated corpus plus the evasion links that were planted in it.
#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub corpus: Corpus,
    /// Every planted `(parent, child)` link, sorted; `group_id` is null.
    pub truth_pairs: Vec<PairRecord>,
}

pub fn generate_synthetic(config: &SynthConfig) -> Result<SyntheticCorpus, CorpusError> {
    config.validate()?;
    Generator::new(config).run()
}

// Words every account may use; all appear in the demonstration lexicon.
const COMMON_WORDS: &[&str] = &[
    "the", "a", "an", "and", "but", "or", "is", "not", "be", "have", "of", "to", "in", "on", "at",
    "for", "with", "from", "about", "into", "over", "after", "before", "i", "me", "my", "you",
    "your", "he", "she", "him", "her", "we", "us", "they", "them", "it", "its", "this", "that",
    "these", "those", "something", "anything", "everything", "ago", "did", "was", "were", "had",
    "been", "went", "talked", "said", "wrote", "made", "used", "changed", "good", "great",
    "happy", "nice", "love", "sad", "bad", "because", "know", "ought", "think", "maybe",
    "reason", "should", "consider", "therefore", "cause", "brother", "talk", "friend", "people",
    "family", "discuss", "share", "ok", "yeah", "thanks",
];

const ABUSIVE_WORDS: &[&str] = &[
    "damn", "hell", "crap", "shit", "ass", "bastard", "lol", "omg", "gonna", "wanna", "stupid",
    "hate", "idiot", "terrible", "awful", "angry", "sex", "naked", "porn", "sucks", "loser",
    "fake", "liar",
];

const COMMENT_WORDS: &[&str] = &[
    "fix", "fixed", "typo", "revert", "reverted", "update", "updated", "add", "added", "remove",
    "removed", "source", "sources", "citation", "cite", "link", "links", "format", "grammar",
    "spelling", "clean", "cleanup", "section", "image", "infobox", "category", "expand", "minor",
    "edit", "edits", "copyedit", "wording", "rv", "vandalism", "undo", "per", "talk", "page",
    "see", "sp", "ref", "refs", "date", "correct", "npov", "tag", "template", "move", "merge",
];

const SYLLABLES: &[&str] = &[
    "ba", "be", "bi", "bo", "bu", "da", "de", "di", "do", "du", "fa", "fe", "fi", "fo", "ga",
    "ge", "gi", "go", "ka", "ke", "ki", "ko", "ku", "la", "le", "li", "lo", "lu", "ma", "me",
    "mi", "mo", "mu", "na", "ne", "ni", "no", "nu", "pa", "pe", "pi", "po", "ra", "re", "ri",
    "ro", "ru", "sa", "se", "si", "so", "su", "ta", "te", "ti", "to", "tu", "va", "ve", "vo",
    "za", "ze", "zo",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Role {
    Parent,
    Child,
    Member,
    Malicious,
    Benign,
}

#[derive(Debug, Clone)]
struct Draft {
    role: Role,
    username: String,
    creation: Timestamp,
    ban: Option<Timestamp>,
    /// End of the active editing period.
    active_until: Timestamp,
    n_revisions: usize,
    interests: Vec<usize>,
    vocab: Vec<usize>,
    /// Index of the draft this account copies behaviour from.
    source: Option<usize>,
    toxicity: f64,
}

struct Generator<'a> {
    config: &'a SynthConfig,
    rng: ChaCha8Rng,
    topical: Vec<String>,
    duration: LogNormal<f64>,
    activity: LogNormal<f64>,
    gap: Exp<f64>,
}

impl<'a> Generator<'a> {
    fn new(config: &'a SynthConfig) -> Self {
        let topical = (0..TOPICAL_VOCAB)
            .map(|i| {
                let n = SYLLABLES.len();
                format!(
                    "{}{}{}",
                    SYLLABLES[i % n],
                    SYLLABLES[(i / n) % n],
                    SYLLABLES[(i * 7 + i / n) % n]
                )
            })
            .collect();
        Self {
            config,
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            topical,
            duration: LogNormal::new(MEDIAN_DURATION_DAYS.ln(), 1.0).expect("valid lognormal"),
            activity: LogNormal::new(MEDIAN_REVISIONS.ln(), 0.7).expect("valid lognormal"),
            gap: Exp::new(1.0 / config.idle_gap_days).expect("positive rate"),
        }
    }

    fn sample_duration(&mut self, scale: f64) -> i64 {
        let days = self.duration.sample(&mut self.rng).min(MAX_DURATION_DAYS) * scale;
        ((days * DAY as f64) as i64).max(HOUR)
    }

    fn sample_gap(&mut self) -> i64 {
        let days = self
            .gap
            .sample(&mut self.rng)
            .min(6.0 * self.config.idle_gap_days);
        ((days * DAY as f64) as i64).max(60)
    }

    fn sample_revision_count(&mut self, scale: f64) -> usize {
        let n = self.activity.sample(&mut self.rng) * scale;
        (n.round() as usize).clamp(1, 400)
    }

    fn sample_page(&mut self) -> usize {
        let u: f64 = self.rng.random();
        ((u * u) * PAGE_UNIVERSE as f64) as usize
    }

    fn fresh_username(&mut self) -> String {
        let n = self.rng.random_range(2..=4);
        let mut name: String = (0..n)
            .map(|_| *SYLLABLES.choose(&mut self.rng).expect("non-empty"))
            .collect();
        if self.rng.random_bool(0.5) {
            let digits = self.rng.random_range(0..1000);
            name.push_str(&digits.to_string());
        }
        let mut chars = name.chars();
        match chars.next() {
            Some(first) => first.to_uppercase().chain(chars).collect(),
            None => name,
        }
    }

    fn mutate_username(&mut self, base: &str) -> String {
        let mut chars: Vec<char> = base.chars().collect();
        let edits = self.rng.random_range(1..=2);
        for _ in 0..edits {
            match self.rng.random_range(0..4) {
                0 => chars.push(char::from(b'0' + self.rng.random_range(0..10u8))),
                1 if !chars.is_empty() => {
                    let i = self.rng.random_range(0..chars.len());
                    let c = chars[i];
                    chars.insert(i, c);
                }
                2 if chars.len() > 1 => {
                    let i = self.rng.random_range(0..chars.len());
                    chars[i] = match chars[i].to_ascii_lowercase() {
                        'a' => '4',
                        'e' => '3',
                        'i' => '1',
                        'o' => '0',
                        's' => '5',
                        c => c.to_ascii_uppercase(),
                    };
                }
                _ => chars.push('_'),
            }
        }
        chars.into_iter().collect()
    }

    fn base_draft(&mut self, role: Role, creation: Timestamp, contrast: f64) -> Draft {
        let duration = self.sample_duration(1.0 + 2.0 * contrast);
        let banned = role != Role::Benign;
        let n_revisions = self.sample_revision_count(1.0 + 1.5 * contrast);
        let n_interests = self.rng.random_range(3..=10) + (8.0 * contrast).round() as usize;
        let interests = (0..n_interests).map(|_| self.sample_page()).collect();
        let vocab = (0..PERSONAL_VOCAB)
            .map(|_| self.rng.random_range(0..TOPICAL_VOCAB))
            .collect();
        let toxicity = match role {
            Role::Benign => 0.0,
            Role::Parent => self.config.toxicity * (1.0 - 0.5 * contrast),
            _ => self.config.toxicity,
        };
        let username = self.fresh_username();
        Draft {
            role,
            username,
            creation,
            ban: banned.then_some(creation + duration),
            active_until: creation + duration,
            n_revisions,
            interests,
            vocab,
            source: None,
            toxicity,
        }
    }

    fn child_of(&mut self, drafts: &[Draft], parent: usize, role: Role) -> Draft {
        let parent_ban = drafts[parent].ban.expect("parents are banned");
        let creation = parent_ban + self.sample_gap();
        let mut child = self.base_draft(role, creation, 0.0);
        if self.rng.random_bool(self.config.username_mutation_rate) {
            child.username = self.mutate_username(&drafts[parent].username);
        }
        child.source = Some(parent);
        child
    }

    fn run(mut self) -> Result<SyntheticCorpus, CorpusError> {
        let cfg = self.config;
        let horizon = (cfg.horizon_days * DAY as f64) as i64;
        let mut drafts: Vec<Draft> = Vec::new();
        let mut groups: Vec<Vec<(usize, usize)>> = Vec::new();
        let mut links: Vec<(usize, usize)> = Vec::new();

        for _ in 0..cfg.n_groups {
            let creation = TIMELINE_START + self.rng.random_range(0..=horizon);
            if self.rng.random_bool(cfg.evasion_rate) {
                let parent = drafts.len();
                let draft = self.base_draft(Role::Parent, creation, cfg.activity_contrast);
                drafts.push(draft);
                let child = drafts.len();
                let draft = self.child_of(&drafts, parent, Role::Child);
                drafts.push(draft);
                links.push((parent, child));
                let mut records = vec![(parent, child)];
                if self.rng.random_bool(cfg.second_round_rate) {
                    let grandchild = drafts.len();
                    let draft = self.child_of(&drafts, child, Role::Member);
                    drafts.push(draft);
                    links.push((child, grandchild));
                    records.push((child, grandchild));
                }
                groups.push(records);
            } else {
                // Simultaneously operated puppets: the second account exists
                // before the first is banned, so no evasion pair forms.
                let first = drafts.len();
                let draft = self.base_draft(Role::Member, creation, 0.0);
                let lifetime = draft.ban.expect("banned") - creation;
                drafts.push(draft);
                let offset = self.rng.random_range(0..lifetime.max(1));
                let draft = self.base_draft(Role::Member, creation + offset, 0.0);
                drafts.push(draft);
                groups.push(vec![(first, first + 1)]);
            }
        }

        // Control pools cover every instant a child or parent can occupy so
        // that matching windows never run off the end of the timeline.
        let longest = (MAX_DURATION_DAYS * (1.0 + 2.0 * cfg.activity_contrast) * DAY as f64) as i64;
        let margin = longest + (6.0 * cfg.idle_gap_days * DAY as f64) as i64 + 14 * DAY;
        let (pool_start, pool_end) = (TIMELINE_START - margin, TIMELINE_START + horizon + margin);
        for _ in 0..cfg.n_nonevading_malicious {
            let creation = self.rng.random_range(pool_start..=pool_end);
            let draft = self.base_draft(Role::Malicious, creation, 0.0);
            drafts.push(draft);
        }
        for _ in 0..cfg.n_benign {
            let creation = self.rng.random_range(pool_start..=pool_end);
            let draft = self.base_draft(Role::Benign, creation, 0.0);
            drafts.push(draft);
        }

        // Ids carry no role information.
        let mut order: Vec<usize> = (0..drafts.len()).collect();
        order.shuffle(&mut self.rng);
        let mut ids = vec![String::new(); drafts.len()];
        for (n, &draft_idx) in order.iter().enumerate() {
            ids[draft_idx] = format!("u{n:06}");
        }

        let accounts: Vec<Account> = drafts
            .iter()
            .zip(&ids)
            .map(|(d, id)| Account {
                account_id: id.clone(),
                username: d.username.clone(),
                creation_time: d.creation,
                ban_time: d.ban,
            })
            .collect();

        // Revisions are generated in draft order so sources precede copies.
        let mut edited_pages: Vec<Vec<String>> = vec![Vec::new(); drafts.len()];
        let mut revisions = Vec::new();
        for idx in 0..drafts.len() {
            let revs = self.revisions_for(&drafts, idx, &ids[idx], &edited_pages);
            edited_pages[idx] = revs.iter().map(|r| r.page_id.clone()).collect();
            revisions.extend(revs);
        }

        let records = groups
            .iter()
            .flat_map(|g| g.iter())
            .map(|&(a, b)| SockpuppetRecord::new([ids[a].clone(), ids[b].clone()]))
            .collect();

        let mut truth_pairs: Vec<PairRecord> = links
            .iter()
            .map(|&(p, c)| PairRecord {
                parent_id: ids[p].clone(),
                child_id: ids[c].clone(),
                group_id: None,
            })
            .collect();
        truth_pairs.sort();

        let corpus = Corpus::new(accounts, revisions, records)?;
        Ok(SyntheticCorpus {
            corpus,
            truth_pairs,
        })
    }

    fn revisions_for(
        &mut self,
        drafts: &[Draft],
        idx: usize,
        id: &str,
        edited_pages: &[Vec<String>],
    ) -> Vec<Revision> {
        let draft = &drafts[idx];
        let span = (draft.active_until - draft.creation).max(1);
        let mut stamps: Vec<Timestamp> = (0..draft.n_revisions)
            .map(|_| draft.creation + self.rng.random_range(0..span))
            .collect();
        stamps.sort_unstable();
        let source = draft.source.map(|s| (&drafts[s], edited_pages[s].as_slice()));

        stamps
            .into_iter()
            .map(|timestamp| {
                let page_id = match source {
                    Some((_, pages))
                        if !pages.is_empty() && self.rng.random_bool(self.config.page_overlap) =>
                    {
                        pages.choose(&mut self.rng).expect("non-empty").clone()
                    }
                    _ => {
                        let page = if self.rng.random_bool(0.6) {
                            *draft.interests.choose(&mut self.rng).expect("non-empty")
                        } else {
                            self.sample_page()
                        };
                        format!("P{page:05}")
                    }
                };
                let source_vocab = source.map(|(s, _)| s.vocab.as_slice());
                let n_added = self.rng.random_range(8..=24);
                let added_text = self.sentence(draft, source_vocab, n_added);
                let deleted_text = if self.rng.random_bool(0.4) {
                    let n = self.rng.random_range(1..=10);
                    self.sentence(draft, source_vocab, n)
                } else {
                    String::new()
                };
                let comment = self.comment(draft, source_vocab);
                Revision {
                    account_id: id.to_string(),
                    page_id,
                    timestamp,
                    added_text,
                    deleted_text,
                    comment,
                }
            })
            .collect()
    }

    fn topical_word(&mut self, draft: &Draft, source_vocab: Option<&[usize]>) -> usize {
        let vocab = match source_vocab {
            Some(v) if self.rng.random_bool(self.config.vocab_reuse) => v,
            _ => &draft.vocab,
        };
        if self.rng.random_bool(0.75) {
            *vocab.choose(&mut self.rng).expect("non-empty")
        } else {
            self.rng.random_range(0..TOPICAL_VOCAB)
        }
    }

    fn sentence(&mut self, draft: &Draft, source_vocab: Option<&[usize]>, n: usize) -> String {
        let mut words: Vec<&str> = Vec::with_capacity(n);
        let mut picks = Vec::with_capacity(n);
        for _ in 0..n {
            if draft.role != Role::Benign && self.rng.random_bool(draft.toxicity) {
                words.push(ABUSIVE_WORDS.choose(&mut self.rng).expect("non-empty"));
                picks.push(None);
            } else if self.rng.random_bool(0.35) {
                words.push(COMMON_WORDS.choose(&mut self.rng).expect("non-empty"));
                picks.push(None);
            } else {
                words.push("");
                picks.push(Some(self.topical_word(draft, source_vocab)));
            }
        }
        let mut out = String::new();
        for (i, (word, pick)) in words.iter().zip(&picks).enumerate() {
            if i > 0 {
                out.push(' ');
            }
            match pick {
                Some(w) => out.push_str(&self.topical[*w]),
                None => out.push_str(word),
            }
        }
        if !out.is_empty() {
            out.push('.');
        }
        out
    }

    fn comment(&mut self, draft: &Draft, source_vocab: Option<&[usize]>) -> String {
        let n = self.rng.random_range(2..=6);
        let mut words = Vec::with_capacity(n);
        for _ in 0..n {
            if self.rng.random_bool(0.3) {
                let w = self.topical_word(draft, source_vocab);
                words.push(self.topical[w].clone());
            } else {
                words.push(COMMENT_WORDS.choose(&mut self.rng).expect("non-empty").to_string());
            }
        }
        words.join(" ")
    }
}
