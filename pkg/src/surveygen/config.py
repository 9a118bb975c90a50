"""Runtime configuration, read from SURVEYGEN_* environment variables."""

from __future__ import annotations

import os
from dataclasses import dataclass, field, fields


def _get(env: dict[str, str], key: str, default):
    raw = env.get(key)
    if raw is None or raw == "":
        return default
    if isinstance(default, bool):
        return raw.lower() in ("1", "true", "yes", "on")
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    return raw


@dataclass
class Settings:
    """Full configuration for providers, pipeline stages, and the service."""

    # storage / service
    storage_root: str = "./surveygen_data"
    port: int = 8000
    frontend_dir: str = ""

    # chat provider ("openai" = OpenAI-compatible HTTP endpoint, "offline" = deterministic fake)
    llm_provider: str = "openai"
    llm_base_url: str = "https://api.openai.com/v1"
    llm_api_key: str = ""
    llm_model: str = "gpt-4o-mini"

    # embedding provider ("openai" or "hash" = deterministic token-hash fake)
    embed_provider: str = "openai"
    embed_base_url: str = "https://api.openai.com/v1"
    embed_api_key: str = ""
    embed_model: str = "text-embedding-3-small"
    embed_dim: int = 256  # used by the hash provider; openai dim is probed

    # retry / throttling
    retry_max: int = 3
    retry_base_delay: float = 1.0
    concurrency_cap: int = 4

    # external commands
    parser_cmd: str = ""   # "<cmd> <input.pdf> <output_dir>" contract
    layout_cmd: str = ""   # "<cmd> -Tpng in.dot -o out.png" contract
    latex_cmd: str = ""    # e.g. "pdflatex" or "tectonic"

    # reference search
    arxiv_base_url: str = "https://export.arxiv.org/api/query"
    arxiv_delay: float = 3.0
    min_ref: int = 10
    max_ref: int = 50
    max_try: int = 3

    # ingestion
    chunk_size: int = 1500
    chunk_overlap: int = 200
    upload_limit_mb: int = 50

    # categorization
    n_hyde: int = 10
    top_k_hyde: int = 3
    candidate_counts: str = "3,4,5,6"
    reducer: str = "pca"       # identity | pca | umap
    reduced_dim: int = 10
    coords_backend: str = "tsne"  # tsne | pca
    description_max_chars: int = 1200

    # outline
    subsection_slots: int = 3

    # composition / citations
    top_k_compose: int = 8
    tau_static: float = 0.70
    k_sigma: float = 1.0
    max_cites_per_sentence: int = 3
    asset_threshold: float = 0.60

    # temperatures (the backbone model is swapped by configuration, not code)
    temperature_extract: float = 0.2
    temperature_prose: float = 0.7
    max_output_tokens: int = 2048

    # offline fake tuning (test support)
    offline_chat_delay: float = 0.0

    def candidate_count_list(self) -> list[int]:
        return [int(tok) for tok in self.candidate_counts.split(",") if tok.strip()]

    @classmethod
    def from_env(cls, env: dict[str, str] | None = None) -> "Settings":
        env = dict(os.environ) if env is None else env
        kwargs = {}
        for f in fields(cls):
            key = "SURVEYGEN_" + f.name.upper()
            kwargs[f.name] = _get(env, key, f.default)
        return cls(**kwargs)
