import pytest

from docqa.corpus import (
    DocumentCollection,
    DocumentMetadata,
    DocumentRecord,
    PageText,
)
from docqa.llm import ScriptedBackend, ScriptEntry


def collection_from_pages(docs: dict[str, list[str]], root: str = "<memory>") -> DocumentCollection:
    """Build an in-memory collection; each dict value is a list of page texts."""
    records = []
    for doc_id in sorted(docs):
        pages = tuple(PageText(i, text) for i, text in enumerate(docs[doc_id], start=1))
        records.append(
            DocumentRecord(
                doc_id=doc_id,
                metadata=DocumentMetadata(page_count=len(pages)),
                pages=pages,
            )
        )
    return DocumentCollection(root=root, documents=tuple(records))


LEDGER_DOC_ID = "files/BlockchainSolana.pdf"

_LEDGER_PAGE_14 = (
    "protocols compared across deployments show throughput gains that are\n"
    "reflected in the increase in performance and strength on confidentiality. "
    "The Hyperledger Fabric architecture is shown in Fig. 9.\n"
    "The platform groups its services into three main component families,\n"
    "each charged with a distinct role in the network."
)

_LEDGER_PAGE_15 = (
    "Fig. 9. Hyperledger Fabric Architecture\n"
    "Membership provides identification services and admits nodes to the\n"
    "system through membership services.\n"
    "Blockchain provides consensus services for the distributed ledger.\n"
    "Chaincode refers to the programs or smart contracts that execute on\n"
    "the blockchain network."
)

_LEDGER_PAGE_16 = (
    "Each component interacts with the ordering service during commits.\n"
    "Later sections compare these assemblies with other platforms."
)


def ledger_pages() -> list[str]:
    """16 pages; the phrases behind the scripted searches sit on pages 14-16."""
    pages = [
        f"Page {n} discusses consensus history and throughput of public ledgers."
        for n in range(1, 14)
    ]
    pages.append(_LEDGER_PAGE_14)
    pages.append(_LEDGER_PAGE_15)
    pages.append(_LEDGER_PAGE_16)
    return pages


def ledger_collection() -> DocumentCollection:
    docs = {
        LEDGER_DOC_ID: ledger_pages(),
        "files/notes.txt": ["Reading notes on consensus protocols.\nNothing about fabrics."],
    }
    collection = collection_from_pages(docs)
    records = []
    for record in collection.documents:
        if record.doc_id == LEDGER_DOC_ID:
            record = DocumentRecord(
                doc_id=record.doc_id,
                metadata=DocumentMetadata(
                    author="Markus Richter",
                    page_count=record.metadata.page_count,
                    file_size_bytes=204_800,
                ),
                pages=record.pages,
            )
        records.append(record)
    return DocumentCollection(root=collection.root, documents=tuple(records))


GOLDEN_QUESTION = (
    "What are the three main components in Hyperledger Fabric and what role "
    "does each component play in the system?"
)

GOLDEN_REPLIES = (
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
)


def golden_script() -> list[ScriptEntry]:
    return [
        ScriptEntry(response=reply, index=i)
        for i, reply in enumerate(GOLDEN_REPLIES, start=1)
    ]


def golden_backend() -> ScriptedBackend:
    return ScriptedBackend(golden_script())


@pytest.fixture
def ledger_corpus() -> DocumentCollection:
    return ledger_collection()
