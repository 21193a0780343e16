"""Cross-encoder relevance scorer service.

Trains a transformer with a sigmoid regression head on (query, context)
pairs and serves it over the scoring protocol (POST /v1/score,
GET /v1/health).
"""

__all__ = ["data", "train", "serve"]
