"""Detection-over-features transformer head.

The detector never sees pixels or tokens: it consumes the frozen encoder
features. Each modality contributes one projected token; a transformer
encoder mixes the sequence, mean pooling collapses it, and a small MLP
head emits one logit per class. In a unimodal configuration the other
modality's features are never read, so predictions are structurally
invariant to them.
"""

from __future__ import annotations

import torch
from torch import nn

from .errors import ShapeMismatch

MODALITIES = ("image-only", "text-only", "multimodal")


class DtTransformer(nn.Module):
    def __init__(
        self,
        image_dim: int,
        text_dim: int,
        width: int,
        layers: int,
        heads: int,
        classes: int = 2,
        modality: str = "multimodal",
        dropout: float = 0.1,
    ):
        super().__init__()
        if modality not in MODALITIES:
            raise ValueError(f"modality must be one of {MODALITIES}")
        if classes not in (2, 3):
            raise ValueError("classes must be 2 or 3")
        if width % heads != 0:
            raise ValueError("width must be divisible by heads")
        self.modality = modality
        self.classes = classes
        self.image_proj = nn.Linear(image_dim, width) if modality != "text-only" else None
        self.text_proj = nn.Linear(text_dim, width) if modality != "image-only" else None
        layer = nn.TransformerEncoderLayer(
            d_model=width,
            nhead=heads,
            dim_feedforward=4 * width,
            dropout=dropout,
            batch_first=True,
        )
        self.encoder = nn.TransformerEncoder(layer, num_layers=layers)
        self.norm = nn.LayerNorm(width)
        self.drop_pool = nn.Dropout(dropout)
        self.hidden = nn.Linear(width, width)
        self.act = nn.GELU()
        self.drop_hidden = nn.Dropout(dropout)
        self.head = nn.Linear(width, classes)

    def _token(self, proj: nn.Linear, feats: torch.Tensor | None, name: str) -> torch.Tensor:
        if feats is None:
            raise ShapeMismatch(f"{name} features are required in {self.modality} mode")
        if feats.ndim != 2 or feats.shape[1] != proj.in_features:
            raise ShapeMismatch(
                f"{name} features must be (batch, {proj.in_features}), got {tuple(feats.shape)}"
            )
        return proj(feats)

    def forward(self, image: torch.Tensor | None = None, text: torch.Tensor | None = None) -> torch.Tensor:
        tokens = []
        if self.image_proj is not None:
            tokens.append(self._token(self.image_proj, image, "image"))
        if self.text_proj is not None:
            tokens.append(self._token(self.text_proj, text, "text"))
        seq = torch.stack(tokens, dim=1)
        pooled = self.encoder(seq).mean(dim=1)
        pooled = self.drop_pool(self.norm(pooled))
        pooled = self.drop_hidden(self.act(self.hidden(pooled)))
        return self.head(pooled)
