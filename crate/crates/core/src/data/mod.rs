//! Task data model: samples, the five-way NL split, tokenization, the
//! synthetic corpus generator, and the corpus file format.

pub mod corpus;
pub mod persist;
pub mod sample;
pub mod vocab;

pub use corpus::{generate_corpus, CorpusError, DifficultyMix};
pub use persist::{load_corpus, save_corpus, PersistError, CORPUS_FORMAT};
pub use sample::{
    full_nl, outputs_match, render_io_examples, split_nl, validate_sample, Difficulty, EpcSample,
    IoExample, SampleError, Split, NL_PART_SEP,
};
pub use vocab::{
    detokenize, ids_to_source, split_words, tokenize, tokenize_code, TokenSeq, VocabError,
    Vocabulary, BOS, EOS, PAD, PART_MARKERS, SEP, UNK,
};

/// Builds the shared vocabulary over every NL part and program in the
/// corpus.
pub fn build_vocabulary(corpus: &[EpcSample]) -> Vocabulary {
    let texts = corpus.iter().flat_map(|s| {
        [
            s.algorithm_tags.as_str(),
            s.problem_description.as_str(),
            s.input_format.as_str(),
            s.output_format.as_str(),
        ]
        .into_iter()
        .chain(s.io_examples.iter().flat_map(|ex| {
            [ex.input.as_str(), ex.output.as_str()]
        }))
    });
    let codes = corpus.iter().flat_map(|s| {
        std::iter::once(s.inefficient_code.as_str())
            .chain(s.efficient_codes.iter().map(String::as_str))
    });
    // The io part is rendered with marker words; make sure they are known.
    let extra = ["input", ":", "output", ";"];
    Vocabulary::build(texts.chain(extra), codes)
}
