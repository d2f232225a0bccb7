"""Document question answering with two interchangeable retrieval back-ends:
an agentic keyword-search loop and a chunk/embed/retrieve RAG baseline, plus
an LLM-as-judge evaluation harness comparing the two."""

from .agent import (
    AgentConfig,
    AgentEpisode,
    AgentStep,
    CommandError,
    FinalAnswerAction,
    MetadataAction,
    ParseError,
    SearchAction,
    TerminatedBy,
    episode_to_dict,
    parse_command,
    parse_llm_step,
    run_agent,
)
from .corpus import (
    CorpusError,
    DocumentCollection,
    DocumentMetadata,
    DocumentRecord,
    MetadataTable,
    PageText,
    corpus_metadata,
    load_corpus,
    save_document,
)
from .harness import (
    Backends,
    ComparisonError,
    Dataset,
    DatasetScores,
    HarnessError,
    RunArtifact,
    RunEntry,
    RunnerConfig,
    compare_runs,
    evaluate_run,
    load_dataset,
    run_dataset,
)
from .llm import (
    BackendError,
    ChatRequest,
    ChatResponse,
    HttpChatBackend,
    HttpConfig,
    ScriptedBackend,
    ScriptEntry,
    ScriptError,
)
from .metrics import (
    AttainmentReport,
    JudgeError,
    MetricScore,
    QARecord,
    StatementVerdict,
    aggregate_runs,
    answer_correctness,
    attainment,
    context_recall,
    decompose_statements,
    faithfulness,
)
from .rag import (
    AnswerRecord,
    Chunk,
    LocalHashEmbedder,
    RagConfig,
    VectorIndex,
    build_index,
    chunk_document,
    rag_answer,
    retrieve,
)
from .search import (
    PatternError,
    SearchMatch,
    SearchQuery,
    SearchResult,
    render_matches,
    search,
)

__version__ = "0.1.0"
