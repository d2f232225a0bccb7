"""Build a small self-contained demo workspace.

Writes a page-sidecar corpus, a one-question dataset and replay scripts for
both the agent and the judge, so the whole CLI flow runs offline:

    python3 scripts/make_demo_corpus.py demo
    docqa ingest demo/corpus
    docqa ask  --mode agent --corpus demo/corpus \
               --question "$(cat demo/question.txt)" --replay demo/agent_script.jsonl
    docqa run  --dataset demo/questions.jsonl --mode agent --corpus demo/corpus \
               --out demo/agent_artifact.json --replay demo/agent_script.jsonl
    docqa eval --artifact demo/agent_artifact.json --dataset demo/questions.jsonl \
               --out demo/agent_scores.json --replay demo/judge_script.jsonl
    docqa report --agent demo/agent_scores.json --rag demo/agent_scores.json \
               --out demo/report
"""

import json
import sys
from pathlib import Path

from docqa.corpus import DocumentMetadata, DocumentRecord, PageText, save_document
from docqa.llm import ScriptEntry, save_script

QUESTION = (
    "What are the three main components in Hyperledger Fabric and what role "
    "does each component play in the system?"
)

GROUND_TRUTH = (
    "Membership admits nodes through membership services, Blockchain provides "
    "consensus for the distributed ledger, and Chaincode runs the smart "
    "contracts on the network."
)

LEDGER_PAGES = [
    f"Page {n} discusses consensus history and throughput of public ledgers."
    for n in range(1, 14)
] + [
    "protocols compared across deployments show throughput gains that are\n"
    "reflected in the increase in performance and strength on confidentiality. "
    "The Hyperledger Fabric architecture is shown in Fig. 9.\n"
    "The platform groups its services into three main component families,\n"
    "each charged with a distinct role in the network.",
    "Fig. 9. Hyperledger Fabric Architecture\n"
    "Membership provides identification services and admits nodes to the\n"
    "system through membership services.\n"
    "Blockchain provides consensus services for the distributed ledger.\n"
    "Chaincode refers to the programs or smart contracts that execute on\n"
    "the blockchain network.",
    "Each component interacts with the ordering service during commits.\n"
    "Later sections compare these assemblies with other platforms.",
]

AGENT_REPLIES = [
    "Thought: The metadata listing does not mention Hyperledger Fabric directly. "
    "I should search for related phrases across the folder.\n"
    "Action: terminal\n"
    "Action Input: rga -i 'hyperledger fabric components|fabric architecture' ./files/",
    "Thought: BlockchainSolana.pdf has hits on pages 14 and 15. I should pull "
    "those pages with more context.\n"
    "Action: terminal\n"
    "Action Input: pdfgrep -inrP --page-range 14-16 '(component|architecture)' "
    "./files/BlockchainSolana.pdf -C 5",
    "Thought: The context names the three components and their roles.\n"
    "Final Answer: The three main components of Hyperledger Fabric are:\n"
    "1. Membership - provides identification services and admits nodes through "
    "membership services.\n"
    "2. Blockchain - provides consensus services for the distributed ledger.\n"
    "3. Chaincode - the programs or smart contracts that execute on the "
    "blockchain network.",
]

JUDGE_REPLIES = [
    "1. Membership admits nodes.\n2. Blockchain provides consensus.\n"
    "3. Chaincode runs contracts.",
    "yes",
    "yes",
    "yes",
    "1. Membership admits nodes.\n2. Blockchain provides consensus.\n"
    "3. Chaincode runs the smart contracts.",
    "yes",
    "yes",
    "yes",
    "1. Membership admits nodes.\n2. Blockchain provides consensus.\n"
    "3. Chaincode runs contracts.",
    "1. Membership admits nodes.\n2. Blockchain provides consensus.\n"
    "3. Chaincode runs the smart contracts.",
    "ANSWER: TP, TP, TP\nGROUND: TP, TP, TP",
]


def main() -> int:
    target = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("demo")
    corpus = target / "corpus"
    corpus.mkdir(parents=True, exist_ok=True)

    record = DocumentRecord(
        doc_id="files/BlockchainSolana.pdf",
        metadata=DocumentMetadata(
            author="Markus Richter",
            page_count=len(LEDGER_PAGES),
            file_size_bytes=204_800,
        ),
        pages=tuple(PageText(i, text) for i, text in enumerate(LEDGER_PAGES, start=1)),
    )
    save_document(record, corpus)
    notes = DocumentRecord(
        doc_id="files/notes.txt",
        metadata=DocumentMetadata(page_count=1, file_size_bytes=64),
        pages=(PageText(1, "Reading notes on consensus protocols.\nNothing about fabrics."),),
    )
    save_document(notes, corpus)

    (target / "question.txt").write_text(QUESTION + "\n", encoding="utf-8")
    (target / "questions.jsonl").write_text(
        json.dumps(
            {
                "question": QUESTION,
                "ground_truth": GROUND_TRUTH,
                "reference_contexts": [LEDGER_PAGES[14]],
            }
        )
        + "\n",
        encoding="utf-8",
    )
    save_script(
        [ScriptEntry(reply, index=i) for i, reply in enumerate(AGENT_REPLIES, start=1)],
        target / "agent_script.jsonl",
    )
    save_script(
        [ScriptEntry(reply, index=i) for i, reply in enumerate(JUDGE_REPLIES, start=1)],
        target / "judge_script.jsonl",
    )
    print(f"demo workspace written under {target}/")
    print(__doc__.split("offline:", 1)[1])
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
