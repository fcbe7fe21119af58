//! Grammar for the tagged rollout text a policy emits.
//!
//! A trajectory is free text interleaved with segments from a closed tag
//! set: `<think>`, `<search>`, `<information>`, `<answer>`, and the
//! optional numbered `<sub_questionN>` / `<sub_answerN>` pairs. Parsing is
//! lenient in exactly the way the runtime is: a closing tag triggers
//! actions, so a dangling closer is a structural error, while a dangling
//! opener (for instance a search whose closer got corrupted into
//! `</search"`) never fired retrieval and simply folds back into the
//! surrounding free text. Render is the exact inverse of parse:
//! `render(parse(s)) == s` byte for byte.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("unbalanced closing tag `</{label}>` at byte {offset}")]
    UnbalancedCloser { label: String, offset: usize },
    #[error("overlapping tag pairs: `{inner}` inside `<{outer}>...</{outer}>` at byte {offset}")]
    Overlapping {
        outer: String,
        inner: String,
        offset: usize,
    },
}

#[derive(Debug, Error)]
pub enum TokenizeError {
    #[error("cannot tokenize an empty trajectory")]
    Empty,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SegmentKind {
    Think,
    Search,
    Information,
    SubQuestion,
    SubAnswer,
    Answer,
}

/// One tagged span. `label` is the exact tag name including any numeric
/// suffix (`sub_question2`), `body` the exact inter-tag text.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub kind: SegmentKind,
    pub label: String,
    pub body: String,
    pub ordinal: usize,
}

impl Segment {
    pub fn open_tag(&self) -> String {
        format!("<{}>", self.label)
    }

    pub fn close_tag(&self) -> String {
        format!("</{}>", self.label)
    }
}

/// One think -> search -> information cycle. `think` is absent when the
/// search was emitted without a preceding think; `information` is present
/// iff the environment responded.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Round {
    pub think: Option<Segment>,
    pub search: Segment,
    pub information: Option<Segment>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Item {
    Text(String),
    Segment(Segment),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub preamble: Option<Segment>,
    pub rounds: Vec<Round>,
    pub sub_qas: Vec<Segment>,
    pub answer: Option<Segment>,
    pub raw: String,
    items: Vec<Item>,
    dangling_openers: Vec<(String, usize)>,
    orphan_information: Vec<usize>,
    answer_count: usize,
    think_count: usize,
    search_count: usize,
}

impl Trajectory {
    pub fn items(&self) -> &[Item] {
        &self.items
    }

    pub fn segments(&self) -> impl Iterator<Item = &Segment> {
        self.items.iter().filter_map(|item| match item {
            Item::Segment(seg) => Some(seg),
            Item::Text(_) => None,
        })
    }

    /// Openers whose exact closer never appeared (byte offsets into `raw`).
    pub fn dangling_openers(&self) -> &[(String, usize)] {
        &self.dangling_openers
    }

    pub fn num_rounds(&self) -> usize {
        self.rounds.len()
    }
}

const TAG_SPECS: [(&str, SegmentKind, bool); 6] = [
    ("think", SegmentKind::Think, false),
    ("search", SegmentKind::Search, false),
    ("information", SegmentKind::Information, false),
    ("answer", SegmentKind::Answer, false),
    ("sub_question", SegmentKind::SubQuestion, true),
    ("sub_answer", SegmentKind::SubAnswer, true),
];

struct TagToken {
    kind: SegmentKind,
    label: String,
    closing: bool,
    len: usize,
}

/// Match a tag of the closed set starting exactly at `pos`, or None.
fn match_tag(text: &str, pos: usize) -> Option<TagToken> {
    let rest = text.get(pos..)?;
    let rest = rest.strip_prefix('<')?;
    let (closing, name_part) = match rest.strip_prefix('/') {
        Some(r) => (true, r),
        None => (false, rest),
    };
    for (prefix, kind, numbered) in TAG_SPECS {
        if let Some(after) = name_part.strip_prefix(prefix) {
            let digits = if numbered {
                after
                    .as_bytes()
                    .iter()
                    .take_while(|b| b.is_ascii_digit())
                    .count()
            } else {
                0
            };
            if after[digits..].starts_with('>') {
                let label = format!("{prefix}{}", &after[..digits]);
                let len = 1 + usize::from(closing) + prefix.len() + digits + 1;
                return Some(TagToken {
                    kind,
                    label,
                    closing,
                    len,
                });
            }
        }
    }
    None
}

/// Next closed-set tag token at or after `from`.
fn find_tag(text: &str, from: usize) -> Option<(usize, TagToken)> {
    let mut search_from = from;
    while let Some(rel) = text[search_from..].find('<') {
        let pos = search_from + rel;
        if let Some(tag) = match_tag(text, pos) {
            return Some((pos, tag));
        }
        search_from = pos + 1;
    }
    None
}

/// Byte offset of the exact closer `</label>` at or after `from`.
fn find_closer(text: &str, from: usize, label: &str) -> Option<usize> {
    let needle = format!("</{label}>");
    text[from..].find(&needle).map(|rel| from + rel)
}

/// Parse text into a trajectory: longest-valid-prefix segmentation over
/// the closed tag set. Dangling openers fold into free text and are
/// recorded for format validation; dangling closers and tags nested
/// inside another pair are structural errors.
pub fn parse(text: &str) -> Result<Trajectory, ParseError> {
    let mut items: Vec<Item> = Vec::new();
    let mut dangling: Vec<(String, usize)> = Vec::new();
    let mut ordinal = 0usize;
    let mut text_start = 0usize;
    let mut pos = 0usize;

    let flush_text = |items: &mut Vec<Item>, start: usize, end: usize| {
        if start < end {
            items.push(Item::Text(text[start..end].to_string()));
        }
    };

    while let Some((tag_pos, tag)) = find_tag(text, pos) {
        if tag.closing {
            return Err(ParseError::UnbalancedCloser {
                label: tag.label,
                offset: tag_pos,
            });
        }
        let body_start = tag_pos + tag.len;
        match find_closer(text, body_start, &tag.label) {
            Some(close_pos) => {
                // Reject any closed-set tag inside the body: pairs must not
                // interleave.
                if let Some((inner_pos, inner)) = find_tag(text, body_start) {
                    if inner_pos < close_pos {
                        let shown = if inner.closing {
                            format!("</{}>", inner.label)
                        } else {
                            format!("<{}>", inner.label)
                        };
                        return Err(ParseError::Overlapping {
                            outer: tag.label,
                            inner: shown,
                            offset: inner_pos,
                        });
                    }
                }
                flush_text(&mut items, text_start, tag_pos);
                items.push(Item::Segment(Segment {
                    kind: tag.kind,
                    label: tag.label.clone(),
                    body: text[body_start..close_pos].to_string(),
                    ordinal,
                }));
                ordinal += 1;
                pos = close_pos + tag.label.len() + 3;
                text_start = pos;
            }
            None => {
                // No exact closer ahead: the opener never triggered an
                // action, so it stays as plain text.
                dangling.push((tag.label, tag_pos));
                pos = body_start;
            }
        }
    }
    flush_text(&mut items, text_start, text.len());

    Ok(assemble(items, text.to_string(), dangling))
}

/// Derive the structured view (rounds, preamble, answer, strays) from the
/// item stream.
fn assemble(items: Vec<Item>, raw: String, dangling_openers: Vec<(String, usize)>) -> Trajectory {
    let mut preamble: Option<Segment> = None;
    let mut pending_think: Option<Segment> = None;
    let mut rounds: Vec<Round> = Vec::new();
    let mut sub_qas: Vec<Segment> = Vec::new();
    let mut answer: Option<Segment> = None;
    let mut orphan_information: Vec<usize> = Vec::new();
    let (mut answer_count, mut think_count, mut search_count) = (0, 0, 0);

    for item in &items {
        let seg = match item {
            Item::Segment(seg) => seg,
            Item::Text(_) => continue,
        };
        match seg.kind {
            SegmentKind::Think => {
                think_count += 1;
                if let Some(prev) = pending_think.replace(seg.clone()) {
                    if rounds.is_empty() && preamble.is_none() {
                        preamble = Some(prev);
                    }
                }
            }
            SegmentKind::Search => {
                search_count += 1;
                rounds.push(Round {
                    think: pending_think.take(),
                    search: seg.clone(),
                    information: None,
                });
            }
            SegmentKind::Information => {
                let attachable = pending_think.is_none()
                    && rounds.last().is_some_and(|r| r.information.is_none());
                if attachable {
                    rounds.last_mut().unwrap().information = Some(seg.clone());
                } else {
                    orphan_information.push(seg.ordinal);
                }
            }
            SegmentKind::SubQuestion | SegmentKind::SubAnswer => sub_qas.push(seg.clone()),
            SegmentKind::Answer => {
                answer_count += 1;
                answer = Some(seg.clone());
            }
        }
    }
    if rounds.is_empty() && preamble.is_none() {
        preamble = pending_think;
    }

    Trajectory {
        preamble,
        rounds,
        sub_qas,
        answer,
        raw,
        items,
        dangling_openers,
        orphan_information,
        answer_count,
        think_count,
        search_count,
    }
}

/// Exact inverse of parse on parse's image; concatenates the item stream.
pub fn render(traj: &Trajectory) -> String {
    let mut out = String::with_capacity(traj.raw.len());
    for item in &traj.items {
        match item {
            Item::Text(t) => out.push_str(t),
            Item::Segment(seg) => {
                out.push_str(&seg.open_tag());
                out.push_str(&seg.body);
                out.push_str(&seg.close_tag());
            }
        }
    }
    debug_assert_eq!(out, traj.raw);
    out
}

/// Search bodies in round order, trimmed. Duplicates are preserved.
pub fn extract_queries(traj: &Trajectory) -> Vec<String> {
    traj.rounds
        .iter()
        .map(|r| r.search.body.trim().to_string())
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FormatRule {
    /// Tool-interaction markup must be well formed: no dangling openers,
    /// no information segment without a preceding search.
    R1,
    /// At least one round of think and search behaviour.
    R2,
    /// Exactly one answer pair, and it must be at the end.
    R3,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub rule: FormatRule,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormatVerdict {
    pub valid: bool,
    pub violations: Vec<Violation>,
}

impl FormatVerdict {
    pub fn violates(&self, rule: FormatRule) -> bool {
        self.violations.iter().any(|v| v.rule == rule)
    }
}

/// Check the three format rules independently and report every violation.
pub fn validate_format(traj: &Trajectory) -> FormatVerdict {
    let mut violations = Vec::new();

    for (label, offset) in &traj.dangling_openers {
        violations.push(Violation {
            rule: FormatRule::R1,
            detail: format!("`<{label}>` at byte {offset} is never properly closed"),
        });
    }
    for ordinal in &traj.orphan_information {
        violations.push(Violation {
            rule: FormatRule::R1,
            detail: format!("information segment #{ordinal} has no preceding search"),
        });
    }

    if traj.think_count == 0 || traj.search_count == 0 {
        violations.push(Violation {
            rule: FormatRule::R2,
            detail: format!(
                "at least one round of think and search is required (found {} think, {} search)",
                traj.think_count, traj.search_count
            ),
        });
    }

    match traj.answer_count {
        0 => violations.push(Violation {
            rule: FormatRule::R3,
            detail: "no answer segment".to_string(),
        }),
        1 => {
            let mut seen_answer = false;
            for item in &traj.items {
                match item {
                    Item::Segment(seg) if seg.kind == SegmentKind::Answer => seen_answer = true,
                    Item::Segment(seg) if seen_answer => {
                        violations.push(Violation {
                            rule: FormatRule::R3,
                            detail: format!(
                                "`<{}>` segment after the answer; the answer must be at the end",
                                seg.label
                            ),
                        });
                        break;
                    }
                    Item::Text(t) if seen_answer && !t.trim().is_empty() => {
                        violations.push(Violation {
                            rule: FormatRule::R3,
                            detail: "text after the answer; the answer must be at the end".into(),
                        });
                        break;
                    }
                    _ => {}
                }
            }
        }
        n => violations.push(Violation {
            rule: FormatRule::R3,
            detail: format!("{n} answer segments; exactly one is allowed"),
        }),
    }

    FormatVerdict {
        valid: violations.is_empty(),
        violations,
    }
}

/// Whitespace tokens of the raw text with tags kept atomic, plus the
/// per-token loss mask: 0 on every information token including its tags,
/// 1 elsewhere. `round_end_index[t]` is the index of round t's closing
/// search tag; `answer_end_index` the final token.
#[derive(Clone, Debug, PartialEq)]
pub struct TokenizedTrajectory {
    pub tokens: Vec<String>,
    pub mask: Vec<bool>,
    pub round_end_index: Vec<usize>,
    pub answer_end_index: Option<usize>,
}

impl TokenizedTrajectory {
    pub fn mask_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

/// Tokenize a parsed trajectory. Total over parse's image: format-invalid
/// trajectories still tokenize (training and scoring need their masks);
/// the reward layer is what gates on validity.
pub fn tokenize_with_mask(traj: &Trajectory) -> TokenizedTrajectory {
    let mut tokens: Vec<String> = Vec::new();
    let mut mask: Vec<bool> = Vec::new();
    let mut round_end_index: Vec<usize> = Vec::new();

    for item in &traj.items {
        match item {
            Item::Text(t) => {
                for tok in t.split_whitespace() {
                    tokens.push(tok.to_string());
                    mask.push(true);
                }
            }
            Item::Segment(seg) => {
                let keep = seg.kind != SegmentKind::Information;
                tokens.push(seg.open_tag());
                mask.push(keep);
                for tok in seg.body.split_whitespace() {
                    tokens.push(tok.to_string());
                    mask.push(keep);
                }
                tokens.push(seg.close_tag());
                mask.push(keep);
                if seg.kind == SegmentKind::Search {
                    round_end_index.push(tokens.len() - 1);
                }
            }
        }
    }

    let answer_end_index = tokens.len().checked_sub(1);
    TokenizedTrajectory {
        tokens,
        mask,
        round_end_index,
        answer_end_index,
    }
}

/// Programmatic construction; mainly for tests and fixtures.
#[derive(Default)]
pub struct TrajectoryBuilder {
    items: Vec<Item>,
    ordinal: usize,
}

impl TrajectoryBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Free text between segments. Must not contain closed-set tags if the
    /// result is expected to round-trip through parse.
    pub fn text(mut self, s: &str) -> Self {
        if s.is_empty() {
            return self;
        }
        if let Some(Item::Text(last)) = self.items.last_mut() {
            last.push_str(s);
        } else {
            self.items.push(Item::Text(s.to_string()));
        }
        self
    }

    fn seg(mut self, kind: SegmentKind, label: String, body: &str) -> Self {
        self.items.push(Item::Segment(Segment {
            kind,
            label,
            body: body.to_string(),
            ordinal: self.ordinal,
        }));
        self.ordinal += 1;
        self
    }

    pub fn think(self, body: &str) -> Self {
        self.seg(SegmentKind::Think, "think".into(), body)
    }

    pub fn search(self, body: &str) -> Self {
        self.seg(SegmentKind::Search, "search".into(), body)
    }

    pub fn information(self, body: &str) -> Self {
        self.seg(SegmentKind::Information, "information".into(), body)
    }

    pub fn answer(self, body: &str) -> Self {
        self.seg(SegmentKind::Answer, "answer".into(), body)
    }

    pub fn sub_question(self, index: usize, body: &str) -> Self {
        self.seg(SegmentKind::SubQuestion, format!("sub_question{index}"), body)
    }

    pub fn sub_answer(self, index: usize, body: &str) -> Self {
        self.seg(SegmentKind::SubAnswer, format!("sub_answer{index}"), body)
    }

    pub fn build(self) -> Trajectory {
        let mut raw = String::new();
        for item in &self.items {
            match item {
                Item::Text(t) => raw.push_str(t),
                Item::Segment(seg) => {
                    raw.push_str(&seg.open_tag());
                    raw.push_str(&seg.body);
                    raw.push_str(&seg.close_tag());
                }
            }
        }
        assemble(self.items, raw, Vec::new())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_ROUND: &str = "<think> find the station city </think>\n\
        <search> where is KBQI located </search>\n\
        <information> Doc 1<## Title: KBQI ##> KBQI is a radio station in Albuquerque </information>\n\
        <think> now the county </think>\n\
        <search> Albuquerque county and state </search>\n\
        <information> Doc 1<## Title: Bernalillo County ##> Albuquerque, New Mexico is in Bernalillo County </information>\n\
        <think> done </think>\n\
        <answer> Bernalillo County, New Mexico </answer>";

    #[test]
    fn parses_two_round_trajectory() {
        let traj = parse(TWO_ROUND).unwrap();
        assert_eq!(traj.num_rounds(), 2);
        assert!(traj.rounds[0].think.is_some());
        assert!(traj.rounds[0].information.is_some());
        assert_eq!(
            traj.answer.as_ref().unwrap().body.trim(),
            "Bernalillo County, New Mexico"
        );
        assert_eq!(
            extract_queries(&traj),
            vec!["where is KBQI located", "Albuquerque county and state"]
        );
    }

    #[test]
    fn render_inverts_parse_byte_exactly() {
        let traj = parse(TWO_ROUND).unwrap();
        assert_eq!(render(&traj), TWO_ROUND);
    }

    #[test]
    fn parse_inverts_render_structurally() {
        let built = TrajectoryBuilder::new()
            .think(" plan ")
            .text("\n")
            .search(" alpha beta ")
            .text("\n")
            .information(" Doc 1<## Title: x ##> alpha beta gamma ")
            .answer(" gamma ")
            .build();
        let reparsed = parse(&render(&built)).unwrap();
        assert_eq!(reparsed, built);
    }

    #[test]
    fn render_empty_trajectory() {
        let traj = parse("").unwrap();
        assert_eq!(render(&traj), "");
        assert_eq!(traj.num_rounds(), 0);
        assert!(traj.answer.is_none());
    }

    #[test]
    fn corrupted_closers_never_form_search_segments() {
        for closer in ["</search\u{201d}", "</search)", "</search\u{bb}", "</search]"] {
            let text = format!("<search> When was Otto von Bismarck born? {closer}");
            let traj = parse(&text).unwrap();
            assert_eq!(traj.num_rounds(), 0, "closer {closer:?} formed a round");
            assert_eq!(traj.dangling_openers().len(), 1);
            assert!(extract_queries(&traj).is_empty());
        }
    }

    #[test]
    fn dangling_closer_is_structural_error() {
        let err = parse("some text </search> more").unwrap_err();
        assert_eq!(
            err,
            ParseError::UnbalancedCloser {
                label: "search".into(),
                offset: 10,
            }
        );
    }

    #[test]
    fn overlapping_pairs_are_structural_errors() {
        let err = parse("<think> a <search> b </think> c </search>").unwrap_err();
        assert!(matches!(err, ParseError::Overlapping { .. }));
    }

    #[test]
    fn unknown_tags_are_plain_text() {
        let traj = parse("<foo> not a tag </foo> <think>t</think><search>q</search>").unwrap();
        assert_eq!(traj.num_rounds(), 1);
        assert!(traj.dangling_openers().is_empty());
        assert!(matches!(&traj.items()[0], Item::Text(t) if t.contains("<foo>")));
    }

    #[test]
    fn numbered_sub_tags_parse_and_must_match() {
        let traj =
            parse("<sub_question1> q1 </sub_question1><sub_answer1> a1 </sub_answer1>").unwrap();
        assert_eq!(traj.sub_qas.len(), 2);
        assert_eq!(traj.sub_qas[0].label, "sub_question1");

        // Mismatched numbers leave a dangling opener (closer belongs to
        // nothing -> structural error instead).
        let err = parse("<sub_question1> q </sub_question2>").unwrap_err();
        assert!(matches!(err, ParseError::UnbalancedCloser { .. }));
    }

    #[test]
    fn missing_answer_is_not_a_parse_error() {
        let traj = parse("<think>t</think><search>q</search>").unwrap();
        assert!(traj.answer.is_none());
    }

    #[test]
    fn validator_passes_well_formed() {
        let verdict = validate_format(&parse(TWO_ROUND).unwrap());
        assert!(verdict.valid, "violations: {:?}", verdict.violations);
    }

    #[test]
    fn validator_r2_without_search() {
        let traj = parse("<think>t</think><answer>a</answer>").unwrap();
        let verdict = validate_format(&traj);
        assert!(!verdict.valid);
        assert!(verdict.violates(FormatRule::R2));
        assert!(!verdict.violates(FormatRule::R1));
        assert!(!verdict.violates(FormatRule::R3));
    }

    #[test]
    fn validator_r3_answer_not_at_end() {
        let traj = parse(
            "<think>t</think><search>q</search><information>d</information>\
             <answer>a</answer><think>trailing</think>",
        )
        .unwrap();
        let verdict = validate_format(&traj);
        assert!(verdict.violates(FormatRule::R3));
        assert!(!verdict.violates(FormatRule::R1));
        assert!(!verdict.violates(FormatRule::R2));
    }

    #[test]
    fn validator_r1_orphan_information() {
        let traj = parse(
            "<think>t</think><information>fabricated</information>\
             <search>q</search><answer>a</answer>",
        )
        .unwrap();
        let verdict = validate_format(&traj);
        assert!(verdict.violates(FormatRule::R1));
        assert!(!verdict.violates(FormatRule::R2));
        assert!(!verdict.violates(FormatRule::R3));
    }

    #[test]
    fn trailing_whitespace_after_answer_is_fine() {
        let traj = parse("<think>t</think><search>q</search><answer>a</answer>\n  ").unwrap();
        assert!(validate_format(&traj).valid);
    }

    #[test]
    fn tokenize_masks_information_spans() {
        let traj = parse(TWO_ROUND).unwrap();
        let tok = tokenize_with_mask(&traj);
        assert_eq!(tok.tokens.len(), tok.mask.len());
        for (t, &m) in tok.tokens.iter().zip(&tok.mask) {
            if t == "<information>" || t == "</information>" {
                assert!(!m);
            }
            if t == "<think>" || t == "</search>" || t == "<answer>" {
                assert!(m, "token {t} should be unmasked");
            }
        }
        // Exactly the two information spans are masked.
        let masked: usize = tok.mask.iter().filter(|&&m| !m).count();
        let info_tokens: usize = traj
            .rounds
            .iter()
            .filter_map(|r| r.information.as_ref())
            .map(|s| s.body.split_whitespace().count() + 2)
            .sum();
        assert_eq!(masked, info_tokens);
    }

    #[test]
    fn tokenize_round_ends_are_closing_search_tags() {
        let traj = parse(TWO_ROUND).unwrap();
        let tok = tokenize_with_mask(&traj);
        assert_eq!(tok.round_end_index.len(), 2);
        for &i in &tok.round_end_index {
            assert_eq!(tok.tokens[i], "</search>");
            assert!(tok.mask[i]);
        }
        assert!(tok.round_end_index[0] < tok.round_end_index[1]);
        assert_eq!(tok.answer_end_index, Some(tok.tokens.len() - 1));
        assert_eq!(tok.tokens[tok.answer_end_index.unwrap()], "</answer>");
    }

    #[test]
    fn minimal_valid_trajectory_has_at_least_four_unmasked_tokens() {
        let traj = parse("<think>a</think><search>b</search>").unwrap();
        let tok = tokenize_with_mask(&traj);
        assert!(tok.mask_count() >= 4);
    }

    #[test]
    fn preamble_think_attaches_to_round_one_by_default() {
        let traj = parse("<think>first</think><search>q</search>").unwrap();
        assert!(traj.preamble.is_none());
        assert_eq!(traj.rounds[0].think.as_ref().unwrap().body, "first");

        // A lone think with no rounds at all is the preamble.
        let lone = parse("<think>solo</think><answer>a</answer>").unwrap();
        assert_eq!(lone.preamble.as_ref().unwrap().body, "solo");
    }
}
