"""Replay a scripted agent episode in memory and print the transcript.

No network, no files: the corpus, the question and the LLM replies are all
inline, which makes this a quick way to see the metadata -> search -> answer
loop end to end.

    python3 scripts/replay_episode_demo.py
"""

from docqa.agent import run_agent
from docqa.corpus import DocumentCollection, DocumentMetadata, DocumentRecord, PageText
from docqa.llm import ScriptedBackend, ScriptEntry

from make_demo_corpus import AGENT_REPLIES, LEDGER_PAGES, QUESTION


def build_collection() -> DocumentCollection:
    record = DocumentRecord(
        doc_id="files/BlockchainSolana.pdf",
        metadata=DocumentMetadata(
            author="Markus Richter",
            page_count=len(LEDGER_PAGES),
            file_size_bytes=204_800,
        ),
        pages=tuple(PageText(i, text) for i, text in enumerate(LEDGER_PAGES, start=1)),
    )
    return DocumentCollection(root="<demo>", documents=(record,))


def main() -> int:
    backend = ScriptedBackend(
        [ScriptEntry(reply, index=i) for i, reply in enumerate(AGENT_REPLIES, start=1)]
    )
    episode = run_agent(QUESTION, build_collection(), backend)
    print(f"Question: {episode.question}\n")
    for step in episode.steps:
        if step.thought:
            print(f"Thought: {step.thought}")
        action = step.action
        command = getattr(action, "command", None)
        if command is not None:
            print(f"Action Input: {command}")
            print(f"Observation:\n{step.observation}\n")
    print(f"Final Answer:\n{episode.final_answer}\n")
    print(f"terminated_by={episode.terminated_by.value}")
    print(f"evidence snippets: {len(episode.evidence_contexts)}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
