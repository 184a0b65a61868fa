//! Prompting, reply parsing and chat-completion transport for model-guided
//! structure search.

pub mod client;
pub mod judge;
pub mod mock;
pub mod prompt;
pub mod reply;

pub use client::{ChatClient, ChatModel, Completion, LlmError, ModelConfig};
pub use judge::{build_judge_prompt, judge, parse_judge_reply, JudgeInput, JudgeVerdict, RUBRIC_FIELDS};
pub use mock::{MockReply, MockServer, RecordedRequest};
pub use prompt::{
    build_prompt, serialize_boolean, serialize_timeseries, HistoryEntry, Message, PromptError, PromptSpec, Role,
    Strategy, TaskContext,
};
pub use reply::{answer_object, display_expression, parse_candidate, ParsedReply, ReplyError, Shape};
