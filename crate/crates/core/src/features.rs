//! Integer feature encoding of note and chord events.
//!
//! Every element becomes a row of small categorical integers: a static
//! description (pitch, or chord root/form/extension), the index of its
//! duration in a corpus-wide vocabulary, and an inverse metrical strength
//! derived from its position in the bar.

use std::collections::BTreeMap;

use ndarray::Array2;
use num_rational::Rational64;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Static value reserved for rests.
pub const REST_VALUE: usize = 128;
/// Number of static pitch values, including the rest value.
pub const PITCH_VOCAB: usize = 129;
pub const ROOT_VOCAB: usize = 12;
pub const FORM_VOCAB: usize = 6;
pub const EXTENSION_VOCAB: usize = 3;
/// Number of metrical levels below the "off-grid" value.
pub const METRICAL_LEVELS: usize = 5;
pub const METRICAL_VOCAB: usize = METRICAL_LEVELS + 1;

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum FeatureError {
    #[error("cannot parse chord symbol {symbol:?} at {rest:?}")]
    ChordParse { symbol: String, rest: String },
    #[error("no metrical template for numerator {0}")]
    UnknownNumerator(u32),
    #[error("duration {0} not in vocabulary")]
    UnknownDuration(Rational64),
    #[error("empty duration vocabulary")]
    EmptyVocab,
    #[error("invalid event: {0}")]
    InvalidEvent(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct NoteEvent {
    /// MIDI pitch, `None` for a rest.
    pub pitch: Option<u8>,
    pub duration: Rational64,
    pub bar_position: Rational64,
    pub ts_numerator: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChordSymbol {
    pub root_pc: u8,
    pub form: u8,
    pub extension: u8,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ChordEvent {
    pub chord: ChordSymbol,
    pub duration: Rational64,
    pub bar_position: Rational64,
    pub ts_numerator: u32,
}

/// A whole input sequence of a single kind.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum EventSequence {
    Notes(Vec<NoteEvent>),
    Chords(Vec<ChordEvent>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SequenceKind {
    #[serde(alias = "melody")]
    Notes,
    Chords,
}

impl SequenceKind {
    /// Vocabulary size of each feature column given a duration vocabulary size.
    pub fn vocab_sizes(self, durations: usize) -> Vec<usize> {
        match self {
            SequenceKind::Notes => vec![PITCH_VOCAB, durations, METRICAL_VOCAB],
            SequenceKind::Chords => vec![
                ROOT_VOCAB,
                FORM_VOCAB,
                EXTENSION_VOCAB,
                durations,
                METRICAL_VOCAB,
            ],
        }
    }
}

impl EventSequence {
    pub fn len(&self) -> usize {
        match self {
            EventSequence::Notes(v) => v.len(),
            EventSequence::Chords(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> SequenceKind {
        match self {
            EventSequence::Notes(_) => SequenceKind::Notes,
            EventSequence::Chords(_) => SequenceKind::Chords,
        }
    }

    /// Rest flag per position; chord sequences never contain rests.
    pub fn rests(&self) -> Vec<bool> {
        match self {
            EventSequence::Notes(v) => v.iter().map(|e| e.pitch.is_none()).collect(),
            EventSequence::Chords(v) => vec![false; v.len()],
        }
    }

    pub fn durations(&self) -> Vec<Rational64> {
        match self {
            EventSequence::Notes(v) => v.iter().map(|e| e.duration).collect(),
            EventSequence::Chords(v) => v.iter().map(|e| e.duration).collect(),
        }
    }

    fn timing(&self, i: usize) -> (Rational64, Rational64, u32) {
        match self {
            EventSequence::Notes(v) => (v[i].duration, v[i].bar_position, v[i].ts_numerator),
            EventSequence::Chords(v) => (v[i].duration, v[i].bar_position, v[i].ts_numerator),
        }
    }

    /// Short human-readable label per element, for rendering.
    pub fn labels(&self) -> Vec<String> {
        match self {
            EventSequence::Notes(v) => v
                .iter()
                .map(|e| match e.pitch {
                    Some(p) => midi_name(p),
                    None => "rest".to_string(),
                })
                .collect(),
            EventSequence::Chords(v) => v.iter().map(|e| format_chord(e.chord)).collect(),
        }
    }
}

pub fn encode_note_static(e: &NoteEvent) -> usize {
    match e.pitch {
        Some(p) => p as usize,
        None => REST_VALUE,
    }
}

const LETTERS: [(char, u8); 7] = [
    ('C', 0),
    ('D', 2),
    ('E', 4),
    ('F', 5),
    ('G', 7),
    ('A', 9),
    ('B', 11),
];
const FORMS: [&str; 6] = ["", "m", "+", "%", "o", "sus"];
const EXTENSIONS: [&str; 3] = ["6", "7", "^7"];

/// Decode a chord symbol `<root><form><extension>`.
pub fn parse_chord_symbol(s: &str) -> Result<ChordSymbol, FeatureError> {
    let err = |rest: &str| FeatureError::ChordParse {
        symbol: s.to_string(),
        rest: rest.to_string(),
    };
    let mut chars = s.chars();
    let letter = chars.next().ok_or_else(|| err(s))?;
    let mut root = LETTERS
        .iter()
        .find(|(c, _)| *c == letter)
        .map(|(_, pc)| *pc)
        .ok_or_else(|| err(s))?;
    let mut rest = &s[letter.len_utf8()..];
    if let Some(r) = rest.strip_prefix('#') {
        root = (root + 1) % 12;
        rest = r;
    } else if let Some(r) = rest.strip_prefix('b') {
        root = (root + 11) % 12;
        rest = r;
    }
    // "sus" must be tried before the empty major form
    let form = [5usize, 1, 2, 3, 4]
        .into_iter()
        .find(|&f| rest.starts_with(FORMS[f]))
        .unwrap_or(0);
    rest = &rest[FORMS[form].len()..];
    let extension = if rest.is_empty() {
        0
    } else {
        EXTENSIONS
            .iter()
            .position(|e| *e == rest)
            .ok_or_else(|| err(rest))?
    };
    Ok(ChordSymbol {
        root_pc: root,
        form: form as u8,
        extension: extension as u8,
    })
}

/// Canonical text for a chord (sharps for accidentals).
pub fn format_chord(c: ChordSymbol) -> String {
    const NAMES: [&str; 12] = [
        "C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B",
    ];
    format!(
        "{}{}{}",
        NAMES[c.root_pc as usize % 12],
        FORMS[c.form as usize],
        EXTENSIONS[c.extension as usize]
    )
}

fn midi_name(p: u8) -> String {
    const NAMES: [&str; 12] = [
        "C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B",
    ];
    format!("{}{}", NAMES[p as usize % 12], p as i32 / 12 - 1)
}

/// Metrical division vectors per time-signature numerator.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricalTemplateTable {
    templates: BTreeMap<u32, [u32; METRICAL_LEVELS]>,
}

impl Default for MetricalTemplateTable {
    fn default() -> Self {
        let templates = [
            (2, [1, 2, 2, 2, 2]),
            (3, [1, 3, 2, 2, 2]),
            (4, [1, 2, 2, 2, 2]),
            (6, [1, 2, 3, 2, 2]),
            (9, [1, 3, 3, 2, 2]),
            (12, [1, 2, 2, 3, 2]),
        ]
        .into_iter()
        .collect();
        MetricalTemplateTable { templates }
    }
}

impl MetricalTemplateTable {
    /// Add or replace a template. Entries must be ≥ 1 and the first must be 1.
    pub fn insert(
        &mut self,
        numerator: u32,
        divisions: [u32; METRICAL_LEVELS],
    ) -> Result<(), FeatureError> {
        if divisions[0] != 1 || divisions.iter().any(|&d| d == 0) {
            return Err(FeatureError::InvalidEvent(format!(
                "bad metrical template {:?}",
                divisions
            )));
        }
        self.templates.insert(numerator, divisions);
        Ok(())
    }

    pub fn template(&self, numerator: u32) -> Result<[u32; METRICAL_LEVELS], FeatureError> {
        self.templates
            .get(&numerator)
            .copied()
            .ok_or(FeatureError::UnknownNumerator(numerator))
    }

    pub fn numerators(&self) -> impl Iterator<Item = u32> + '_ {
        self.templates.keys().copied()
    }

    /// Grid step `δ_l` of every level.
    pub fn grid_steps(&self, numerator: u32) -> Result<Vec<Rational64>, FeatureError> {
        let m = self.template(numerator)?;
        let mut product = 1i64;
        Ok(m.iter()
            .map(|&d| {
                product *= d as i64;
                Rational64::new(1, product)
            })
            .collect())
    }

    /// Lowest level whose grid contains `t`, or [`METRICAL_LEVELS`] if none does.
    pub fn inverse_metrical_strength(
        &self,
        t: Rational64,
        numerator: u32,
    ) -> Result<usize, FeatureError> {
        let steps = self.grid_steps(numerator)?;
        Ok(steps
            .iter()
            .position(|&step| (t / step).is_integer())
            .unwrap_or(METRICAL_LEVELS))
    }
}

pub fn metrical_template(numerator: u32) -> Result<[u32; METRICAL_LEVELS], FeatureError> {
    MetricalTemplateTable::default().template(numerator)
}

pub fn inverse_metrical_strength(t: Rational64, numerator: u32) -> Result<usize, FeatureError> {
    MetricalTemplateTable::default().inverse_metrical_strength(t, numerator)
}

/// Sorted list of the distinct durations occurring in a corpus.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DurationVocab {
    durations: Vec<Rational64>,
}

impl DurationVocab {
    pub fn new(mut durations: Vec<Rational64>) -> Result<Self, FeatureError> {
        if durations.is_empty() {
            return Err(FeatureError::EmptyVocab);
        }
        durations.sort();
        durations.dedup();
        Ok(DurationVocab { durations })
    }

    pub fn len(&self) -> usize {
        self.durations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.durations.is_empty()
    }

    pub fn entries(&self) -> &[Rational64] {
        &self.durations
    }

    pub fn index_of(&self, d: Rational64) -> Option<usize> {
        self.durations.binary_search(&d).ok()
    }

    /// Index of `d`, or of the nearest entry when absent (ties go to the
    /// shorter duration).
    pub fn nearest_index(&self, d: Rational64) -> usize {
        match self.durations.binary_search(&d) {
            Ok(i) => i,
            Err(0) => 0,
            Err(i) if i == self.durations.len() => i - 1,
            Err(i) => {
                let below = d - self.durations[i - 1];
                let above = self.durations[i] - d;
                if above < below {
                    i
                } else {
                    i - 1
                }
            }
        }
    }
}

pub fn build_duration_vocab<'a, I>(corpus: I) -> Result<DurationVocab, FeatureError>
where
    I: IntoIterator<Item = &'a EventSequence>,
{
    DurationVocab::new(corpus.into_iter().flat_map(|s| s.durations()).collect())
}

/// How to treat durations missing from the vocabulary.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DurationPolicy {
    #[default]
    Nearest,
    Strict,
}

/// `λ × φ` integer feature rows.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeatureMatrix {
    pub values: Array2<usize>,
    pub kind: SequenceKind,
}

impl FeatureMatrix {
    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    pub fn width(&self) -> usize {
        self.values.ncols()
    }
}

/// Feature extractor holding the corpus-level state.
#[derive(Clone, Debug)]
pub struct FeatureExtractor {
    pub vocab: DurationVocab,
    pub templates: MetricalTemplateTable,
    pub policy: DurationPolicy,
}

impl FeatureExtractor {
    pub fn new(vocab: DurationVocab) -> Self {
        FeatureExtractor {
            vocab,
            templates: MetricalTemplateTable::default(),
            policy: DurationPolicy::Nearest,
        }
    }

    pub fn strict(mut self, strict: bool) -> Self {
        self.policy = if strict {
            DurationPolicy::Strict
        } else {
            DurationPolicy::Nearest
        };
        self
    }

    fn duration_index(&self, d: Rational64) -> Result<usize, FeatureError> {
        match self.policy {
            DurationPolicy::Strict => self.vocab.index_of(d).ok_or(FeatureError::UnknownDuration(d)),
            DurationPolicy::Nearest => Ok(self.vocab.nearest_index(d)),
        }
    }

    pub fn extract(&self, seq: &EventSequence) -> Result<FeatureMatrix, FeatureError> {
        let kind = seq.kind();
        let width = kind.vocab_sizes(0).len();
        let mut values = Array2::zeros((seq.len(), width));
        for i in 0..seq.len() {
            let (duration, position, numerator) = seq.timing(i);
            validate_timing(duration, position)?;
            let dur = self.duration_index(duration)?;
            let metre = self.templates.inverse_metrical_strength(position, numerator)?;
            let row: Vec<usize> = match seq {
                EventSequence::Notes(v) => vec![encode_note_static(&v[i]), dur, metre],
                EventSequence::Chords(v) => {
                    let c = v[i].chord;
                    if c.root_pc >= 12 || c.form >= 6 || c.extension >= 3 {
                        return Err(FeatureError::InvalidEvent(format!("chord {:?}", c)));
                    }
                    vec![
                        c.root_pc as usize,
                        c.form as usize,
                        c.extension as usize,
                        dur,
                        metre,
                    ]
                }
            };
            for (j, v) in row.into_iter().enumerate() {
                values[[i, j]] = v;
            }
        }
        Ok(FeatureMatrix { values, kind })
    }
}

fn validate_timing(duration: Rational64, position: Rational64) -> Result<(), FeatureError> {
    if duration <= Rational64::zero() {
        return Err(FeatureError::InvalidEvent(format!(
            "non-positive duration {}",
            duration
        )));
    }
    if position < Rational64::zero() || position >= Rational64::one() {
        return Err(FeatureError::InvalidEvent(format!(
            "bar position {} outside [0, 1)",
            position
        )));
    }
    Ok(())
}

pub fn extract_features(
    seq: &EventSequence,
    vocab: &DurationVocab,
) -> Result<FeatureMatrix, FeatureError> {
    FeatureExtractor::new(vocab.clone()).extract(seq)
}

/// Bar positions for consecutive events starting on a downbeat, given
/// durations in measures.
pub fn bar_positions(durations: &[Rational64]) -> Vec<Rational64> {
    let mut t = Rational64::zero();
    durations
        .iter()
        .map(|d| {
            let here = t.fract();
            t += d;
            here
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> Rational64 {
        Rational64::new(n, d)
    }

    fn note(pitch: Option<u8>, dur: Rational64, pos: Rational64, num: u32) -> NoteEvent {
        NoteEvent {
            pitch,
            duration: dur,
            bar_position: pos,
            ts_numerator: num,
        }
    }

    #[test]
    fn static_note_encoding() {
        let e = |p| note(p, r(1, 4), r(0, 1), 4);
        assert_eq!(encode_note_static(&e(Some(60))), 60);
        assert_eq!(encode_note_static(&e(None)), 128);
        assert_eq!(encode_note_static(&e(Some(0))), 0);
    }

    #[test]
    fn chord_symbols() {
        let c = |root_pc, form, extension| ChordSymbol {
            root_pc,
            form,
            extension,
        };
        assert_eq!(parse_chord_symbol("C6").unwrap(), c(0, 0, 0));
        assert_eq!(parse_chord_symbol("Dm7").unwrap(), c(2, 1, 1));
        assert_eq!(parse_chord_symbol("G^7").unwrap(), c(7, 0, 2));
        assert_eq!(parse_chord_symbol("Bb7").unwrap(), c(10, 0, 1));
        assert_eq!(parse_chord_symbol("F#%7").unwrap(), c(6, 3, 1));
        assert_eq!(parse_chord_symbol("Cb").unwrap(), c(11, 0, 0));
        assert_eq!(parse_chord_symbol("Eo7").unwrap(), c(4, 4, 1));
        assert_eq!(parse_chord_symbol("Asus7").unwrap(), c(9, 5, 1));
        assert_eq!(parse_chord_symbol("Ab+").unwrap(), c(8, 2, 0));
        assert_eq!(parse_chord_symbol("Em^7").unwrap(), c(4, 1, 2));
    }

    #[test]
    fn chord_symbol_errors() {
        assert_eq!(
            parse_chord_symbol("Cm9"),
            Err(FeatureError::ChordParse {
                symbol: "Cm9".into(),
                rest: "9".into()
            })
        );
        assert!(parse_chord_symbol("H7").is_err());
        assert!(parse_chord_symbol("").is_err());
    }

    #[test]
    fn chord_format_round_trip() {
        for root_pc in 0..12 {
            for form in 0..6 {
                for extension in 0..3 {
                    let c = ChordSymbol {
                        root_pc,
                        form,
                        extension,
                    };
                    assert_eq!(parse_chord_symbol(&format_chord(c)).unwrap(), c);
                }
            }
        }
    }

    #[test]
    fn templates() {
        assert_eq!(metrical_template(12).unwrap(), [1, 2, 2, 3, 2]);
        assert_eq!(metrical_template(6).unwrap(), [1, 2, 3, 2, 2]);
        assert_eq!(metrical_template(4).unwrap(), [1, 2, 2, 2, 2]);
        assert_eq!(metrical_template(7), Err(FeatureError::UnknownNumerator(7)));
    }

    #[test]
    fn six_eight_grid() {
        let table = MetricalTemplateTable::default();
        assert_eq!(
            table.grid_steps(6).unwrap(),
            vec![r(1, 1), r(1, 2), r(1, 6), r(1, 12), r(1, 24)]
        );
        let strengths: Vec<usize> = [r(0, 1), r(2, 6), r(1, 2)]
            .iter()
            .map(|&t| inverse_metrical_strength(t, 6).unwrap())
            .collect();
        assert_eq!(strengths, vec![0, 2, 1]);
    }

    #[test]
    fn off_grid_and_downbeat() {
        assert_eq!(inverse_metrical_strength(r(1, 5), 4).unwrap(), 5);
        let table = MetricalTemplateTable::default();
        for n in table.numerators() {
            assert_eq!(table.inverse_metrical_strength(r(0, 1), n).unwrap(), 0);
        }
        assert_eq!(
            inverse_metrical_strength(r(1, 2), 5),
            Err(FeatureError::UnknownNumerator(5))
        );
    }

    #[test]
    fn template_override() {
        let mut table = MetricalTemplateTable::default();
        table.insert(5, [1, 5, 2, 2, 2]).unwrap();
        assert_eq!(table.inverse_metrical_strength(r(2, 5), 5).unwrap(), 1);
        assert!(table.insert(5, [2, 5, 2, 2, 2]).is_err());
    }

    #[test]
    fn grids_are_nested() {
        // once t lies on level l it lies on every finer level
        let table = MetricalTemplateTable::default();
        for n in table.numerators() {
            let steps = table.grid_steps(n).unwrap();
            for den in 1..=48 {
                for num in 0..den {
                    let t = r(num, den);
                    let on: Vec<bool> = steps.iter().map(|&s| (t / s).is_integer()).collect();
                    if let Some(first) = on.iter().position(|&b| b) {
                        assert!(on[first..].iter().all(|&b| b), "n={} t={}", n, t);
                    }
                }
            }
        }
    }

    #[test]
    fn shared_templates_give_equal_strengths() {
        let table = MetricalTemplateTable::default();
        for den in 1..=48 {
            for num in 0..den {
                let t = r(num, den);
                assert_eq!(
                    table.inverse_metrical_strength(t, 2).unwrap(),
                    table.inverse_metrical_strength(t, 4).unwrap()
                );
            }
        }
    }

    #[test]
    fn duration_vocab() {
        let seq = EventSequence::Notes(vec![
            note(Some(60), r(1, 4), r(0, 1), 4),
            note(Some(62), r(1, 2), r(1, 4), 4),
            note(Some(64), r(1, 4), r(3, 4), 4),
        ]);
        let v = build_duration_vocab([&seq]).unwrap();
        assert_eq!(v.entries(), &[r(1, 4), r(1, 2)]);
        assert!(DurationVocab::new(vec![]).is_err());
    }

    #[test]
    fn nearest_duration() {
        let v = DurationVocab::new(vec![r(1, 4), r(1, 2), r(1, 1)]).unwrap();
        assert_eq!(v.nearest_index(r(1, 8)), 0);
        assert_eq!(v.nearest_index(r(3, 8)), 0); // tie goes to the shorter
        assert_eq!(v.nearest_index(r(5, 8)), 1);
        assert_eq!(v.nearest_index(r(3, 1)), 2);
        assert_eq!(v.nearest_index(r(1, 2)), 1);
    }

    #[test]
    fn extract_rest_row() {
        let seq = EventSequence::Notes(vec![note(None, r(1, 1), r(0, 1), 4)]);
        let vocab = DurationVocab::new(vec![r(1, 1)]).unwrap();
        let x = extract_features(&seq, &vocab).unwrap();
        assert_eq!(x.values.row(0).to_vec(), vec![128, 0, 0]);
    }

    #[test]
    fn extract_six_eight_melody() {
        let durs = [r(2, 6), r(1, 6), r(3, 6)];
        let pos = bar_positions(&durs);
        assert_eq!(pos, vec![r(0, 1), r(2, 6), r(1, 2)]);
        let seq = EventSequence::Notes(
            durs.iter()
                .zip(&pos)
                .map(|(&d, &p)| note(Some(67), d, p, 6))
                .collect(),
        );
        let vocab = build_duration_vocab([&seq]).unwrap();
        let x = extract_features(&seq, &vocab).unwrap();
        assert_eq!(x.values.column(2).to_vec(), vec![0, 2, 1]);
        assert_eq!(x.values.column(1).to_vec(), vec![1, 0, 2]);
    }

    #[test]
    fn extract_chord_row() {
        let seq = EventSequence::Chords(vec![ChordEvent {
            chord: parse_chord_symbol("C6").unwrap(),
            duration: r(1, 1),
            bar_position: r(0, 1),
            ts_numerator: 4,
        }]);
        let vocab = DurationVocab::new(vec![r(1, 2), r(1, 1)]).unwrap();
        let x = extract_features(&seq, &vocab).unwrap();
        assert_eq!(x.values.row(0).to_vec(), vec![0, 0, 0, 1, 0]);
    }

    #[test]
    fn strict_durations() {
        let seq = EventSequence::Notes(vec![note(Some(60), r(1, 3), r(0, 1), 4)]);
        let vocab = DurationVocab::new(vec![r(1, 4), r(1, 2)]).unwrap();
        let fx = FeatureExtractor::new(vocab);
        assert_eq!(fx.extract(&seq).unwrap().values[[0, 1]], 0);
        assert_eq!(
            fx.strict(true).extract(&seq),
            Err(FeatureError::UnknownDuration(r(1, 3)))
        );
    }

    #[test]
    fn long_tied_notes_are_allowed() {
        let seq = EventSequence::Notes(vec![note(Some(60), r(5, 2), r(1, 2), 4)]);
        let vocab = DurationVocab::new(vec![r(5, 2)]).unwrap();
        assert!(extract_features(&seq, &vocab).is_ok());
        let bad = EventSequence::Notes(vec![note(Some(60), r(1, 2), r(1, 1), 4)]);
        assert!(matches!(
            extract_features(&bad, &vocab),
            Err(FeatureError::InvalidEvent(_))
        ));
    }
}
