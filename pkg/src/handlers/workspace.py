"""
Workspace Store
Loads and saves every network the commands exchange through
<workspace>/checkpoints, using the namespaced checkpoint archives.

    base.pt      generator, discriminator, extractor, embedder
    encoder.pt   encoder
    uncond.pt    generator (g′), discriminator
    stage2.pt    extrinsic, discriminator   markers: stage2_complete
    stage3.pt    extrinsic, discriminator   markers: stage2_complete, stage3_complete
    sampler.pt   sampler
"""

import logging
from dataclasses import asdict
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from ..codec.decoder import CheckpointReader
from ..codec.encoder import CheckpointWriter
from ..config import GeneratorConfig
from ..errors import EnvironmentFailure
from ..losses.extractor import FeatureExtractor, IdentityEmbedder
from ..losses.objectives import LossSuite
from ..models.encoder import LatentEncoder
from ..models.extrinsic import DualStyleGenerator, ExtrinsicPath
from ..models.sampler import StyleSampler
from ..models.synthesis import BaseGenerator, Discriminator
from ..numerics.store import ParameterStore

logger = logging.getLogger(__name__)

CHECKPOINT_DIR = "checkpoints"


class WorkspaceStore:
    """
    Checkpoint access for one workspace.

    Capabilities:
    - Save/load the base bundle (g, D, feature extractor, identity embedder)
    - Save/load encoder, unconditional g′, stage checkpoints and samplers
    - Report stage markers
    """

    def __init__(self, workspace: Path, seed: int = 0):
        """
        Args:
            workspace: Run workspace root
            seed: Run seed written into checkpoint metadata
        """
        self.workspace = Path(workspace)
        self.seed = seed
        self.directory = self.workspace / CHECKPOINT_DIR

    def path(self, name: str) -> Path:
        return self.directory / f"{name}.pt"

    def exists(self, name: str) -> bool:
        return self.path(name).exists()

    def _reader(self, name: str, hint: str) -> CheckpointReader:
        path = self.path(name)
        if not path.exists():
            raise EnvironmentFailure(f"checkpoint {path} not found; run {hint} first")
        return CheckpointReader(path)

    def _write(self, name: str, modules: Dict[str, Any], config: GeneratorConfig,
               markers: Optional[List[str]] = None, **metadata: Any) -> Path:
        store = ParameterStore()
        for namespace, module in modules.items():
            store.update(ParameterStore.from_module(module, namespace))
        header = {"generator": asdict(config), "seed": self.seed, "markers": list(markers or [])}
        header.update(metadata)
        return CheckpointWriter(self.path(name)).write(store, header)

    @staticmethod
    def _generator_config(reader: CheckpointReader) -> GeneratorConfig:
        return GeneratorConfig(**reader.metadata["generator"])

    # -- base bundle ---------------------------------------------------------

    def save_base(self, g: BaseGenerator, D: Discriminator, extractor: FeatureExtractor,
                  embedder: IdentityEmbedder, step: Optional[int] = None) -> Path:
        return self._write("base", {"generator": g, "discriminator": D,
                                    "extractor": extractor, "embedder": embedder},
                           g.config, extractor_seed=extractor.seed,
                           embedding_dim=embedder.embedding_dim, step=step)

    def load_base(self) -> Tuple[BaseGenerator, Discriminator, LossSuite]:
        """Returns (g, D, LossSuite(extractor, embedder)); g is frozen."""
        reader = self._reader("base", "train-base")
        config = self._generator_config(reader)
        g, D = BaseGenerator(config), Discriminator(config)
        extractor = FeatureExtractor(reader.metadata.get("extractor_seed", 0))
        embedder = IdentityEmbedder(reader.metadata.get("embedding_dim", 32))
        store = reader.store()
        store.load_into(g, "generator")
        store.load_into(D, "discriminator")
        store.load_into(extractor, "extractor")
        store.load_into(embedder, "embedder")
        g.requires_grad_(False)
        embedder.requires_grad_(False)
        return g, D, LossSuite(extractor, embedder)

    # -- encoder / g′ ----------------------------------------------------------

    def save_encoder(self, encoder: LatentEncoder) -> Path:
        return self._write("encoder", {"encoder": encoder}, encoder.config)

    def load_encoder(self) -> LatentEncoder:
        reader = self._reader("encoder", "train-encoder")
        encoder = LatentEncoder(self._generator_config(reader))
        reader.store().load_into(encoder, "encoder")
        encoder.requires_grad_(False)
        return encoder

    def save_uncond(self, g_prime: BaseGenerator, D_prime: Discriminator,
                    step: Optional[int] = None) -> Path:
        return self._write("uncond", {"generator": g_prime, "discriminator": D_prime},
                           g_prime.config, step=step)

    def load_uncond(self) -> BaseGenerator:
        reader = self._reader("uncond", "finetune-uncond")
        g_prime = BaseGenerator(self._generator_config(reader))
        reader.store().load_into(g_prime, "generator")
        g_prime.requires_grad_(False)
        return g_prime

    # -- stages ----------------------------------------------------------------

    def save_stage(self, name: str, G: DualStyleGenerator, D: Discriminator,
                   markers: List[str], step: Optional[int] = None) -> Path:
        return self._write(name, {"extrinsic": G.extrinsic, "discriminator": D},
                           G.base.config, markers, step=step)

    def load_stage(self, name: str, g: BaseGenerator,
                   D: Optional[Discriminator] = None) -> Tuple[DualStyleGenerator, List[str]]:
        """
        Rebuild G on top of g from a stage checkpoint; loads D in place when given.

        Returns:
            (G, completion markers)
        """
        hint = "pretrain" if name == "stage2" else "finetune"
        reader = self._reader(name, hint)
        extrinsic = ExtrinsicPath(g)
        store = reader.store()
        store.load_into(extrinsic, "extrinsic")
        if D is not None:
            store.load_into(D, "discriminator")
        return DualStyleGenerator(g, extrinsic), list(reader.metadata.get("markers", []))

    def latest_stage(self) -> str:
        """Name of the most advanced completed stage checkpoint."""
        if self.exists("stage3"):
            return "stage3"
        if self.exists("stage2"):
            return "stage2"
        raise EnvironmentFailure(f"no stage checkpoint in {self.directory}; run pretrain first")

    # -- sampler -----------------------------------------------------------------

    def save_sampler(self, sampler: StyleSampler, config: GeneratorConfig,
                     noise_dim: int, hidden: int) -> Path:
        return self._write("sampler", {"sampler": sampler}, config,
                           noise_dim=noise_dim, hidden=hidden)

    def load_sampler(self) -> StyleSampler:
        reader = self._reader("sampler", "train-sampler")
        sampler = StyleSampler(self._generator_config(reader),
                               reader.metadata["noise_dim"], reader.metadata["hidden"])
        reader.store().load_into(sampler, "sampler")
        sampler.requires_grad_(False)
        return sampler
