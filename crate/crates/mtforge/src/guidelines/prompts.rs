//! Prompt builders and reply parsers for the verifiable-instruction
//! stages: source generation, source verification, and translation.

use thiserror::Error;

use super::GuidelineBundle;
use crate::model::LanguageTag;

pub const SOURCE_MARKER: &str = "###SOURCE###";
pub const GUIDELINES_MARKER: &str = "###GUIDELINES###";
pub const END_MARKER: &str = "###END###";
pub const EVALUATION_MARKER: &str = "###EVALUATION###";
pub const CHECK_LABEL: &str = "Guidelines Check:";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PromptError {
    #[error("reply is missing the {0} marker")]
    MarkerMissing(&'static str),
    #[error("reply has no `Guidelines Check:` line")]
    CheckMissing,
    #[error("`Guidelines Check:` value must be 0 or 1, got {0:?}")]
    CheckInvalid(String),
}

const GENERATION_TEMPLATE: &str = r#"Requirements:
- The document must be EXACTLY the specified length
- Must naturally incorporate elements that match ALL guidelines
- Keep the text coherent and natural
- For paragraphs, use 2-3 sentences per paragraph
- Do not mention the guidelines explicitly in the text

Output format:
###SOURCE###
[Your text here]
###GUIDELINES###
[Copy the given guidelines exactly]
###END###

Here are two examples:

Example 1:
- LENGTH: 1 sentence
- TOPIC: Technology - Software Development
- GUIDELINES:
1) [Date Formatting] Convert dates to MM/DD/YYYY
2) [Terminology] Add full form in parentheses after acronyms

###SOURCE###
The AI team announced on March 15th that their new NLP system had achieved breakthrough performance in code generation.
###GUIDELINES###
1) Convert dates to MM/DD/YYYY, e.g., March 15th to 03/15/2022
2) Add full form 'Natural Language Processing' in parentheses after acronyms, e.g., NLP (Natural Language Processing)
###END###

Example 2:
- LENGTH: 1 paragraph
- TOPIC: Social Media - Digital Marketing
- GUIDELINES:
1) [Case Formatting] Convert all text to lowercase
2) [Social Media] Add hashtags at end of sentence for: brands (#brand), actions (#marketing)
3) [Email Formatting] Convert email mentions to [EMAIL]address[/EMAIL]

###SOURCE###
Instagram and TikTok launched new advertising features last week. Digital marketers can now contact our support team at help@instagram.com for early access to these tools, while brands on TikTok are already reporting increased engagement rates.
###GUIDELINES###
1) Convert all text to lowercase
2) Add hashtags at end of sentence for: brands (#brand), actions (#marketing)
3) Convert email mentions to [EMAIL]address[/EMAIL]
###END###

Your task:
- LENGTH: {length}
- TOPIC: {topic}
- GUIDELINES:
{guideline_txt}

Important Instructions for Source Text:
1. Write a text that contains all necessary elements that COULD be transformed according to the guidelines, but deliberately does NOT follow the guidelines yet
2. For example:
- If a guideline requires formatting dates as MM/DD/YYYY, write dates in a different format
- If a guideline requires wrapping emails in tags, include email addresses without tags
- If a guideline requires expanding acronyms, use acronyms without expansions
3. The text should be natural and coherent, reading as a normal document would
4. Make sure every guideline has corresponding elements in the text that can be transformed
5. Think of the source text as the "before" version that will later be transformed into an "after" version following the guideline"#;

const VERIFICATION_TEMPLATE: &str = r#"You are an expert judge evaluating source documents that will be used for guideline-based text rewriting tasks. Your task is to carefully analyze whether a text follows any given guidelines. First, analyze each guideline carefully, then decide if the text follows ANY of the guidelines.

Example 1:
Guidelines:
1) [Email Format] Convert email to [EMAIL]address[/EMAIL]
2) [Case] Convert product names to UPPERCASE
Source Text: Contact us at help@company.com about the zenith software.

###EVALUATION###
Analysis:
Guideline 1 (Email Format):
- Text contains raw email "help@company.com"
- Email is NOT wrapped in [EMAIL] tags
- This guideline is NOT followed

Guideline 2 (Case):
- Text contains product name "zenith"
- Product name is in lowercase
- This guideline is NOT followed

Number of guidelines followed: 0/2
Guidelines Check: 0
###END###

Example 2:
Guidelines:
1) [Email Format] Convert email to [EMAIL]address[/EMAIL]
2) [Case] Convert product names to UPPERCASE
Source Text: Contact us at [EMAIL]help@company.com[/EMAIL] about the ZENITH software.

###EVALUATION###
Analysis:
Guideline 1 (Email Format):
- Text contains email wrapped in [EMAIL] tags [EMAIL]help@company.com[/EMAIL]
- This guideline is FOLLOWED

Guideline 2 (Case):
- Text contains product name "ZENITH" in UPPERCASE
- This guideline is FOLLOWED

Number of guidelines followed: 2/2
Guidelines Check: 1
###END###

Example 3:
Guidelines:
1) Convert month names to 3 letter abbreviations
2) Convert lists to 1., 2., format
Source Text: The meeting is scheduled for January 1st, 2023. The agenda includes: 1) Budget review, 2) Project updates.

###EVALUATION###
Analysis:
Guideline 1 (Month Abbreviations):
- Text contains full month name "January"
- Month is NOT in 3-letter format (should be "Jan")
- This guideline is NOT followed

Guideline 2 (List Format):
- Text contains list with format "1)" and "2)"
- Lists are NOT in "1." format
- This guideline is NOT followed

Number of guidelines followed: 0/2
Guidelines Check: 0
###END###

Now evaluate this input:
Topic: {topic}
Length: {length}
Guidelines: {guidelines}
Source Text: {source_text}

Your evaluation must:
1. Analyze each guideline separately and explicitly state if it's followed
2. Count the total guidelines followed
3. Conclude with a Guidelines Check score: Score 1 if ANY guideline is followed; Score 0 if NO guidelines are followed

Use exactly this format:
###EVALUATION###
Analysis: (Analysis of each guideline)
Number of guidelines followed: [X/Y] --- there is no such a thing as half a guideline, so X should be an integer between 0 and Y (also an integer)
Guidelines Check: [1 for ANY followed, 0 for NONE followed]
###END###"#;

/// Few-shot prompt asking a generator for a source text that sets up the
/// bundle's guidelines without following any of them yet.
pub fn build_generation_prompt(bundle: &GuidelineBundle) -> String {
    GENERATION_TEMPLATE
        .replace("{length}", bundle.length.label())
        .replace("{topic}", &bundle.topic.to_string())
        .replace("{guideline_txt}", &bundle.guideline_text())
}

/// Judge prompt checking whether a generated source already follows any
/// of its guidelines. A compliant source is useless as training input,
/// so a positive check rejects the sample.
pub fn build_verification_prompt(bundle: &GuidelineBundle, source_text: &str) -> String {
    VERIFICATION_TEMPLATE
        .replace("{topic}", &bundle.topic.to_string())
        .replace("{length}", bundle.length.label())
        .replace("{guidelines}", &format!("\n{}", bundle.guideline_text()))
        .replace("{source_text}", source_text)
}

/// Plain translation request that carries the guidelines along, so the
/// model applies them while translating.
pub fn build_translation_prompt(
    bundle: &GuidelineBundle,
    source_text: &str,
    lp0: &LanguageTag,
    lp1: &LanguageTag,
) -> String {
    format!(
        "Translate the following {} text into {}, applying every guideline below to the translation.\n\n\
         Guidelines:\n{}\n\n\
         Source text:\n{}\n\n\
         Return only the translated text.",
        lp0.display_name(),
        lp1.display_name(),
        bundle.guideline_text(),
        source_text
    )
}

/// The two payload blocks of a generator reply.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenerationReply {
    pub source_text: String,
    pub guidelines_text: String,
}

/// Extracts the source and guideline blocks from a generator reply. The
/// three markers must appear in order; text outside them is ignored.
pub fn parse_generation(reply: &str) -> Result<GenerationReply, PromptError> {
    let src_at = reply
        .find(SOURCE_MARKER)
        .ok_or(PromptError::MarkerMissing(SOURCE_MARKER))?;
    let after_src = &reply[src_at + SOURCE_MARKER.len()..];
    let gl_at = after_src
        .find(GUIDELINES_MARKER)
        .ok_or(PromptError::MarkerMissing(GUIDELINES_MARKER))?;
    let after_gl = &after_src[gl_at + GUIDELINES_MARKER.len()..];
    let end_at = after_gl
        .find(END_MARKER)
        .ok_or(PromptError::MarkerMissing(END_MARKER))?;
    Ok(GenerationReply {
        source_text: after_src[..gl_at].trim().to_owned(),
        guidelines_text: after_gl[..end_at].trim().to_owned(),
    })
}

/// Reads the final `Guidelines Check:` value from a judge reply. Returns
/// true when the judge saw at least one guideline already followed. The
/// last occurrence wins so prompt echoes do not confuse the read, and
/// anything but a bare 0 or 1 (brackets tolerated) is an error.
pub fn parse_verification(reply: &str) -> Result<bool, PromptError> {
    let at = reply.rfind(CHECK_LABEL).ok_or(PromptError::CheckMissing)?;
    let rest = reply[at + CHECK_LABEL.len()..].trim_start();
    let token = rest.split_whitespace().next().unwrap_or("");
    let token = token.trim_matches(|c| c == '[' || c == ']');
    match token {
        "0" => Ok(false),
        "1" => Ok(true),
        other => Err(PromptError::CheckInvalid(other.to_owned())),
    }
}
