use crate::error::{Error, Result};

/// A run of whole sentences that fits the provider token budget.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Chunk {
    pub text: String,
    pub estimated_tokens: usize,
}

/// Average tokens per whitespace-delimited word, in tenths.
///
/// Unknown languages get the most conservative known ratio.
pub fn tokens_per_word_tenths(language: &str) -> usize {
    match language {
        "en" => 13,
        "fr" => 20,
        "de" | "es" => 21,
        _ => 21,
    }
}

fn tokens_for_words(words: usize, tenths: usize) -> usize {
    (words * tenths).div_ceil(10)
}

/// `ceil(word_count * ratio)` for the language's tokens-per-word ratio.
pub fn estimate_tokens(text: &str, language: &str) -> usize {
    tokens_for_words(text.split_whitespace().count(), tokens_per_word_tenths(language))
}

fn is_terminal(c: char) -> bool {
    matches!(c, '.' | '!' | '?' | '。')
}

/// Splits on terminal punctuation followed by whitespace or end of text.
/// The ideographic full stop also ends a sentence when followed directly by
/// more text, since CJK prose is not space-separated.
pub fn split_sentences(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if !is_terminal(c) {
            continue;
        }
        let end = i + c.len_utf8();
        let boundary = match chars.peek() {
            None => true,
            Some((_, next)) => next.is_whitespace() || (c == '。' && !is_terminal(*next)),
        };
        if boundary {
            let s = text[start..end].trim();
            if !s.is_empty() {
                out.push(s.to_string());
            }
            start = end;
        }
    }
    let tail = text[start..].trim();
    if !tail.is_empty() {
        out.push(tail.to_string());
    }
    out
}

/// Greedily packs sentences into chunks of at most `budget` estimated tokens.
///
/// A sentence that alone exceeds the budget is split on word boundaries into
/// the fewest pieces that fit.
pub fn chunk_sentences(text: &str, language: &str, budget: usize) -> Result<Vec<Chunk>> {
    let tenths = tokens_per_word_tenths(language);
    if budget == 0 || tokens_for_words(1, tenths) > budget {
        return Err(Error::ConfigInvalid(format!(
            "token budget {budget} cannot hold a single {language} word"
        )));
    }
    let max_words = (1..)
        .take_while(|w| tokens_for_words(*w, tenths) <= budget)
        .last()
        .unwrap_or(1);

    let mut chunks = Vec::new();
    let mut current: Vec<&str> = Vec::new();
    let flush = |current: &mut Vec<&str>, chunks: &mut Vec<Chunk>| {
        if !current.is_empty() {
            let text = current.join(" ");
            chunks.push(Chunk {
                estimated_tokens: tokens_for_words(text.split_whitespace().count(), tenths),
                text,
            });
            current.clear();
        }
    };

    let sentences = split_sentences(text);
    let mut current_words = 0;
    for sentence in &sentences {
        let words = sentence.split_whitespace().count();
        if tokens_for_words(words, tenths) > budget {
            flush(&mut current, &mut chunks);
            current_words = 0;
            let all: Vec<&str> = sentence.split_whitespace().collect();
            for piece in all.chunks(max_words) {
                chunks.push(Chunk {
                    text: piece.join(" "),
                    estimated_tokens: tokens_for_words(piece.len(), tenths),
                });
            }
            continue;
        }
        if tokens_for_words(current_words + words, tenths) > budget {
            flush(&mut current, &mut chunks);
            current_words = 0;
        }
        current.push(sentence);
        current_words += words;
    }
    flush(&mut current, &mut chunks);
    Ok(chunks)
}
