//! Praat TextGrid reader (long and short text formats).
//!
//! Both formats carry the same token stream once labels (`xmin =`,
//! `intervals [3]:`, ...) are discarded: quoted strings, numbers and
//! `<exists>` flags. We tokenize that stream and read it positionally.

use super::{AlignmentError, AlignmentHierarchy, Segment, SilenceLabels};

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Str(String),
    Num(f64),
    Flag(String),
}

fn tokenize(text: &str) -> Result<Vec<(Token, usize)>, AlignmentError> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let mut tokens = Vec::new();
    let mut chars = text.char_indices().peekable();
    let mut line = 1;
    while let Some(&(_, c)) = chars.peek() {
        match c {
            '\n' => {
                line += 1;
                chars.next();
            }
            c if c.is_whitespace() => {
                chars.next();
            }
            '!' => {
                // comment to end of line
                while let Some(&(_, c)) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    chars.next();
                }
            }
            '"' => {
                let start_line = line;
                chars.next();
                let mut s = String::new();
                loop {
                    match chars.next() {
                        Some((_, '"')) => {
                            if matches!(chars.peek(), Some(&(_, '"'))) {
                                chars.next();
                                s.push('"');
                            } else {
                                break;
                            }
                        }
                        Some((_, ch)) => {
                            if ch == '\n' {
                                line += 1;
                            }
                            s.push(ch);
                        }
                        None => {
                            return Err(AlignmentError::Syntax { line: start_line, message: "unterminated string".into() })
                        }
                    }
                }
                tokens.push((Token::Str(s), start_line));
            }
            '[' => {
                // index brackets such as `item [2]:` carry no data
                for (_, ch) in chars.by_ref() {
                    if ch == ']' {
                        break;
                    }
                }
            }
            '<' => {
                chars.next();
                let mut s = String::new();
                for (_, ch) in chars.by_ref() {
                    if ch == '>' {
                        break;
                    }
                    s.push(ch);
                }
                tokens.push((Token::Flag(s), line));
            }
            _ => {
                let mut word = String::new();
                while let Some(&(_, ch)) = chars.peek() {
                    if ch.is_whitespace() || ch == '"' || ch == '[' || ch == '<' || ch == '!' {
                        break;
                    }
                    word.push(ch);
                    chars.next();
                }
                if let Ok(v) = word.parse::<f64>() {
                    tokens.push((Token::Num(v), line));
                }
                // bare identifiers (`xmin`, `=`, `intervals:`) are labels
            }
        }
    }
    Ok(tokens)
}

struct Reader {
    tokens: Vec<(Token, usize)>,
    pos: usize,
}

impl Reader {
    fn line(&self) -> usize {
        self.tokens.get(self.pos).or(self.tokens.last()).map_or(1, |t| t.1)
    }

    fn err(&self, message: impl Into<String>) -> AlignmentError {
        AlignmentError::Syntax { line: self.line(), message: message.into() }
    }

    fn string(&mut self, what: &str) -> Result<String, AlignmentError> {
        match self.tokens.get(self.pos) {
            Some((Token::Str(s), _)) => {
                self.pos += 1;
                Ok(s.clone())
            }
            _ => Err(self.err(format!("expected string ({what})"))),
        }
    }

    fn number(&mut self, what: &str) -> Result<f64, AlignmentError> {
        match self.tokens.get(self.pos) {
            Some((Token::Num(v), _)) => {
                self.pos += 1;
                Ok(*v)
            }
            _ => Err(self.err(format!("expected number ({what})"))),
        }
    }

    fn count(&mut self, what: &str) -> Result<usize, AlignmentError> {
        let v = self.number(what)?;
        if v < 0.0 || v.fract() != 0.0 {
            return Err(self.err(format!("expected non-negative integer ({what})")));
        }
        Ok(v as usize)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TierKind {
    Interval,
    Point,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tier {
    pub name: String,
    pub kind: TierKind,
    pub xmin: f64,
    pub xmax: f64,
    /// Intervals (for point tiers, start == end == the point time).
    pub items: Vec<Segment>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TextGrid {
    pub xmin: f64,
    pub xmax: f64,
    pub tiers: Vec<Tier>,
}

impl TextGrid {
    pub fn parse(text: &str) -> Result<Self, AlignmentError> {
        let mut r = Reader { tokens: tokenize(text)?, pos: 0 };
        let file_type = r.string("file type")?;
        if file_type != "ooTextFile" {
            return Err(r.err(format!("unsupported file type {file_type:?}")));
        }
        let class = r.string("object class")?;
        if class != "TextGrid" {
            return Err(r.err(format!("object class {class:?} is not TextGrid")));
        }
        let xmin = r.number("xmin")?;
        let xmax = r.number("xmax")?;
        let n_tiers = match r.tokens.get(r.pos) {
            Some((Token::Flag(f), _)) if f == "exists" => {
                r.pos += 1;
                r.count("tier count")?
            }
            Some((Token::Flag(_), _)) => {
                r.pos += 1;
                0
            }
            None => 0,
            _ => return Err(r.err("expected <exists> or <absent>")),
        };
        let mut tiers = Vec::with_capacity(n_tiers);
        for _ in 0..n_tiers {
            let class = r.string("tier class")?;
            let name = r.string("tier name")?;
            let t_min = r.number("tier xmin")?;
            let t_max = r.number("tier xmax")?;
            let n = r.count("item count")?;
            let (kind, items) = match class.as_str() {
                "IntervalTier" => {
                    let mut items = Vec::with_capacity(n);
                    for _ in 0..n {
                        let a = r.number("interval xmin")?;
                        let b = r.number("interval xmax")?;
                        let text = r.string("interval text")?;
                        items.push(Segment::new(text, a, b));
                    }
                    (TierKind::Interval, items)
                }
                "TextTier" => {
                    let mut items = Vec::with_capacity(n);
                    for _ in 0..n {
                        let t = r.number("point time")?;
                        let mark = r.string("point mark")?;
                        items.push(Segment::new(mark, t, t));
                    }
                    (TierKind::Point, items)
                }
                other => return Err(r.err(format!("unknown tier class {other:?}"))),
            };
            tiers.push(Tier { name, kind, xmin: t_min, xmax: t_max, items });
        }
        Ok(Self { xmin, xmax, tiers })
    }

    pub fn interval_tier(&self, name: &str) -> Result<&Tier, AlignmentError> {
        self.tiers
            .iter()
            .find(|t| t.kind == TierKind::Interval && t.name == name)
            .ok_or_else(|| AlignmentError::TierNotFound(name.to_string()))
    }
}

/// Parses a TextGrid with the default silence labels.
pub fn parse_textgrid(text: &str, word_tier: &str, phone_tier: &str) -> Result<AlignmentHierarchy, AlignmentError> {
    parse_textgrid_with(text, word_tier, phone_tier, SilenceLabels::default())
}

pub fn parse_textgrid_with(
    text: &str,
    word_tier: &str,
    phone_tier: &str,
    silence: SilenceLabels,
) -> Result<AlignmentHierarchy, AlignmentError> {
    let grid = TextGrid::parse(text)?;
    let words = grid.interval_tier(word_tier)?;
    let phones = grid.interval_tier(phone_tier)?;
    let transcript: Vec<&str> = words
        .items
        .iter()
        .filter(|s| !silence.is_silence(&s.label))
        .map(|s| s.label.trim())
        .collect();
    let utterance = Segment::new(transcript.join(" "), grid.xmin, grid.xmax);
    AlignmentHierarchy::build(utterance, words.items.clone(), phones.items.clone(), None, silence)
}
