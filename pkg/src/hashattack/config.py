"""Flat ``key = value`` experiment configuration.

One file drives every pipeline stage.  Serialization is canonical
(fixed field order, repr floats, comma-joined width tuples), so the
hash of the text identifies the configuration and checkpoints can
refuse to load under a different one.
"""

import hashlib
from dataclasses import dataclass, fields
from pathlib import Path

from .baselines import AttackBudget
from .data import DataConfig
from .errors import ConfigError
from .gan import GanConfig
from .hashing import HashTrainConfig


@dataclass(frozen=True)
class ExperimentConfig:
    # synthetic data
    classes: int = 4
    image_height: int = 16
    image_width: int = 16
    image_channels: int = 1
    train_size: int = 500
    database_size: int = 1000
    query_size: int = 100
    noise_sigma: float = 0.02
    extra_class_probability: float = 0.3
    template_contrast: float = 0.05
    # hash model under attack
    code_length: int = 12
    hash_hidden_widths: tuple = (128, 64)
    hash_epochs: int = 600
    hash_batch_size: int = 32
    hash_learning_rate: float = 0.001
    quantization_weight: float = 0.01
    # adversarial generator training
    attack_epochs: int = 40
    attack_batch_size: int = 16
    attack_learning_rate: float = 0.0001
    discriminator_learning_rate: float = 0.003
    alpha1: float = 1.0
    alpha2: float = 0.0001
    alpha3: float = 1.0
    reconstruction_weight: float = 50.0
    adversarial_weight: float = 1.0
    prototype_hidden_widths: tuple = (64, 32)
    representation_width: int = 32
    decoder_hidden: int = 256
    generator_bottleneck: int = 256
    discriminator_hidden_widths: tuple = (64,)
    disable_hamming_loss: bool = False
    disable_discriminator_classes: bool = False
    # optimization baselines
    epsilon: float = 2.0 / 255.0
    step_size: float = 1.0 / 255.0
    iterations: int = 200
    anchor_set_size: int = 9
    # independently trained model for transfer runs
    transfer_code_length: int = 12
    transfer_hidden_widths: tuple = (96, 48)

    def to_text(self):
        lines = []
        for spec in fields(self):
            lines.append(f"{spec.name} = {_format(spec.type, getattr(self, spec.name))}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        known = {spec.name: spec for spec in fields(cls)}
        values = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
            key, _, value = line.partition("=")
            key = key.strip()
            if key not in known:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            if key in values:
                raise ConfigError(f"line {lineno}: duplicate key {key!r}")
            values[key] = _parse(known[key].type, key, value.strip(), lineno)
        return cls(**values)

    @classmethod
    def from_file(cls, path):
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        return cls.from_text(path.read_text())

    def save(self, path):
        Path(path).write_text(self.to_text())

    def config_hash(self):
        return hashlib.sha256(self.to_text().encode()).hexdigest()

    # stage-level views
    def data_config(self):
        return DataConfig(
            classes=self.classes,
            height=self.image_height,
            width=self.image_width,
            channels=self.image_channels,
            train_size=self.train_size,
            database_size=self.database_size,
            query_size=self.query_size,
            noise_sigma=self.noise_sigma,
            extra_class_probability=self.extra_class_probability,
            template_contrast=self.template_contrast,
        )

    def hash_config(self):
        return HashTrainConfig(
            code_length=self.code_length,
            hidden_widths=self.hash_hidden_widths,
            epochs=self.hash_epochs,
            batch_size=self.hash_batch_size,
            learning_rate=self.hash_learning_rate,
            quantization_weight=self.quantization_weight,
        )

    def transfer_hash_config(self):
        return HashTrainConfig(
            code_length=self.transfer_code_length,
            hidden_widths=self.transfer_hidden_widths,
            epochs=self.hash_epochs,
            batch_size=self.hash_batch_size,
            learning_rate=self.hash_learning_rate,
            quantization_weight=self.quantization_weight,
        )

    def gan_config(self):
        return GanConfig(
            epochs=self.attack_epochs,
            batch_size=self.attack_batch_size,
            learning_rate=self.attack_learning_rate,
            discriminator_learning_rate=self.discriminator_learning_rate,
            alpha1=self.alpha1,
            alpha2=self.alpha2,
            alpha3=self.alpha3,
            reconstruction_weight=self.reconstruction_weight,
            adversarial_weight=self.adversarial_weight,
            prototype_hidden=self.prototype_hidden_widths,
            representation_width=self.representation_width,
            decoder_hidden=self.decoder_hidden,
            generator_bottleneck=self.generator_bottleneck,
            discriminator_hidden=self.discriminator_hidden_widths,
            disable_hamming_loss=self.disable_hamming_loss,
            disable_discriminator_classes=self.disable_discriminator_classes,
        )

    def budget(self):
        return AttackBudget(
            epsilon=self.epsilon,
            step_size=self.step_size,
            iterations=self.iterations,
        )

    def validate(self):
        self.data_config().validate()
        self.hash_config().validate()
        self.transfer_hash_config().validate()
        self.gan_config().validate()
        self.budget().validate()
        if self.anchor_set_size < 1:
            raise ConfigError(
                f"anchor set size must be positive, got {self.anchor_set_size}"
            )


def _format(kind, value):
    if kind is bool:
        return "true" if value else "false"
    if kind is float:
        return repr(float(value))
    if kind is tuple:
        return ",".join(str(int(v)) for v in value)
    return str(value)


def _parse(kind, key, text, lineno):
    try:
        if kind is bool:
            if text == "true":
                return True
            if text == "false":
                return False
            raise ValueError(f"expected true or false, got {text!r}")
        if kind is int:
            return int(text)
        if kind is float:
            return float(text)
        if kind is tuple:
            if not text:
                return ()
            return tuple(int(piece.strip()) for piece in text.split(","))
    except ValueError as err:
        raise ConfigError(f"line {lineno}: bad value for {key!r}: {err}") from err
    raise ConfigError(f"line {lineno}: no parser for field type {kind!r}")
