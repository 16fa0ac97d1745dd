"""Typed configuration of the dual-branch model."""

from typing import Optional

from pydantic import BaseModel, Field, model_validator


class HmilConfig(BaseModel):
    """Shape and seed of an :class:`~hmil.model.network.HmilModel`.

    Parameters
    ----------
    d_c:
        Width of the offline (coarse) instance features.
    d_f:
        Width of the re-embedded fine features. Default: ``d_c / 4``, or
        ``d_c`` when ``use_ofr`` is false.
    n_coarse, n_fine:
        Class counts ``K_c`` and ``K_f``; ``K_f >= K_c``.
    ofr_hidden:
        Hidden width of the re-embedder. Default: ``d_c / 2``.
    use_ofr:
        When false the fine branch consumes ``h_c`` directly.
    seed:
        Initialization seed (unsigned 64-bit).

    Examples
    --------
    .. code-block:: python

        HmilConfig(d_c=16, n_coarse=2, n_fine=4).fine_width  # 4
    """

    d_c: int = Field(ge=1)
    d_f: Optional[int] = Field(default=None, ge=1)
    n_coarse: int = Field(ge=1)
    n_fine: int = Field(ge=1)
    ofr_hidden: Optional[int] = Field(default=None, ge=1)
    use_ofr: bool = True
    seed: int = Field(default=0, ge=0, lt=2**64)

    @model_validator(mode="after")
    def check_widths(self) -> "HmilConfig":
        if self.n_fine < self.n_coarse:
            raise ValueError(
                f"n_fine ({self.n_fine}) must be >= n_coarse ({self.n_coarse})"
            )
        if not self.use_ofr:
            if self.d_f is not None and self.d_f != self.d_c:
                raise ValueError("without the re-embedder d_f must equal d_c")
        elif self.d_f is None and self.d_c % 4 != 0:
            raise ValueError(f"d_c ({self.d_c}) must be divisible by 4 when d_f is defaulted")
        return self

    @property
    def fine_width(self) -> int:
        if not self.use_ofr:
            return self.d_c
        return self.d_f if self.d_f is not None else self.d_c // 4

    @property
    def hidden_width(self) -> int:
        return self.ofr_hidden if self.ofr_hidden is not None else max(1, self.d_c // 2)
