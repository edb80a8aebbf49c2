"""End-to-end pipeline stages over one shared output directory.

Every stage reads its inputs from earlier stages' files, so the
pipeline can resume from any point.  Per-stage random streams are
children of the run seed, which keeps every stage reproducible on its
own and shares the drawn attack targets across generation and scoring.
Wall-clock numbers never enter report files; they live in
``timings.json`` so reports from equal seeds match byte for byte.
"""

import json
import time
from pathlib import Path

import numpy as np

from .baselines import anchor_attack, anchor_code_for_label, noise_queries, p2p_attack
from .checkpoint import (
    load_attack_stack,
    load_hash_model,
    save_attack_stack,
    save_hash_model,
)
from .data import gen_synthetic_dataset, load_bundle, save_bundle, unique_labels
from .errors import CheckpointMissingError, InputError
from .evaluation import evaluate_queries, t_map
from .gan import _pick_targets, targeted_examples, train_attack_gan
from .hashing import encode_database, train_target_model

# child-stream indices under the run seed; shared draws must reuse the
# same index from every stage that needs them
STAGE_STREAMS = {
    "data": 0,
    "hash": 1,
    "attack": 2,
    "eval_targets": 3,
    "p2p": 4,
    "dhta": 5,
    "noise": 6,
    "transfer": 7,
    "anchor": 8,
}

METHOD_SLUGS = {
    "Original": "original",
    "Noise": "noise",
    "P2P": "p2p",
    "DHTA": "dhta",
    "ProS-GAN": "prosgan",
    "Anchor-code": "anchor",
    "Prototype-code": "prototype",
}


def stage_rng(seed, stream):
    if stream not in STAGE_STREAMS:
        raise InputError(f"unknown random stream {stream!r}")
    sequence = np.random.SeedSequence(entropy=seed,
                                      spawn_key=(STAGE_STREAMS[stream],))
    return np.random.default_rng(sequence)


def _require(path, hint):
    path = Path(path)
    if not path.is_file():
        raise CheckpointMissingError(f"missing {path.name}; run {hint} first")
    return path


def _write_json(path, payload):
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _cell(value):
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def _write_csv(path, header, rows):
    lines = [header]
    for row in rows:
        lines.append(",".join(_cell(value) for value in row))
    Path(path).write_text("\n".join(lines) + "\n")


def update_timings(out, **entries):
    """Merge wall-clock entries into the run's timing sidecar."""
    target = Path(out) / "timings.json"
    current = json.loads(target.read_text()) if target.is_file() else {}
    current.update({key: float(value) for key, value in entries.items()})
    _write_json(target, current)


def _load_data(out):
    return load_bundle(_require(Path(out) / "dataset.npz", "gen-data"))


def _load_hash(config, out):
    path = _require(Path(out) / "hash_model.json", "train-hash")
    model, _ = load_hash_model(path, config_hash=config.config_hash())
    return model


def _load_codes(out):
    path = _require(Path(out) / "codes.npz", "encode-db")
    with np.load(path) as blob:
        return blob["code_matrix"]


def _load_examples(out, slug):
    path = _require(Path(out) / f"adversarial_{slug}.npz", slug)
    with np.load(path) as blob:
        return blob["originals"], blob["perturbed"], blob["target_labels"]


def _save_examples(out, slug, originals, perturbed, target_labels):
    np.savez(
        Path(out) / f"adversarial_{slug}.npz",
        originals=np.asarray(originals, dtype=np.float64),
        perturbed=np.asarray(perturbed, dtype=np.float64),
        target_labels=np.asarray(target_labels, dtype=np.float64),
    )


def eval_target_labels(config, seed, bundle):
    """The one shared draw of per-query attack targets for this run."""
    label_set = unique_labels(bundle.train_labels)
    return _pick_targets(stage_rng(seed, "eval_targets"), bundle.query_labels,
                         label_set)


def stage_gen_data(config, seed, out):
    config.validate()
    bundle = gen_synthetic_dataset(config.data_config(), stage_rng(seed, "data"))
    save_bundle(bundle, Path(out) / "dataset.npz")
    return {
        "train": int(bundle.train_images.shape[0]),
        "database": int(bundle.database_images.shape[0]),
        "query": int(bundle.query_images.shape[0]),
        "pixels": int(bundle.train_images.shape[1]),
    }


def stage_train_hash(config, seed, out):
    config.validate()
    bundle = _load_data(out)
    model, losses = train_target_model(bundle.train_images, bundle.train_labels,
                                       config.hash_config(),
                                       stage_rng(seed, "hash"))
    save_hash_model(Path(out) / "hash_model.json", model, seed=seed,
                    config_hash=config.config_hash(),
                    meta={"final_loss": losses[-1]})
    _write_csv(Path(out) / "hash_training.csv", "epoch,loss",
               list(enumerate(losses)))
    return {"epochs": len(losses), "final_loss": float(losses[-1])}


def stage_encode_db(config, seed, out):
    config.validate()
    bundle = _load_data(out)
    model = _load_hash(config, out)
    matrix = encode_database(model, bundle.database_images)
    np.savez(Path(out) / "codes.npz", code_matrix=matrix)
    return {"items": int(matrix.shape[1]), "code_length": int(matrix.shape[0])}


def stage_train_attack(config, seed, out):
    config.validate()
    bundle = _load_data(out)
    model = _load_hash(config, out)
    train_codes = encode_database(model, bundle.train_images)
    label_set = unique_labels(bundle.train_labels)
    stack, history = train_attack_gan(
        bundle.train_images, bundle.train_labels, label_set, model,
        train_codes, config.gan_config(), stage_rng(seed, "attack"),
    )
    save_attack_stack(Path(out) / "attack_stack.json", stack, seed=seed,
                      config_hash=config.config_hash(),
                      meta={"final_losses": list(history[-1][1:])})
    _write_csv(Path(out) / "attack_training.csv",
               "epoch,prototype_loss,generator_loss,discriminator_loss", history)
    return {"epochs": len(history),
            "final_generator_loss": float(history[-1][2])}


def stage_attack(config, seed, out):
    config.validate()
    bundle = _load_data(out)
    path = _require(Path(out) / "attack_stack.json", "train-attack")
    stack, _ = load_attack_stack(path, config_hash=config.config_hash())
    targets = eval_target_labels(config, seed, bundle)
    examples = targeted_examples(stack, bundle.query_images, targets)
    _save_examples(out, "prosgan", bundle.query_images,
                   [example.perturbed for example in examples], targets)
    mean_time = float(np.mean([example.generation_time for example in examples]))
    update_timings(out, generation_prosgan_seconds=mean_time)
    return {"count": len(examples), "mean_generation_seconds": mean_time}


def stage_baseline(config, seed, out, method):
    config.validate()
    bundle = _load_data(out)
    targets = eval_target_labels(config, seed, bundle)
    if method == "noise":
        started = time.perf_counter()
        noisy = noise_queries(bundle.query_images, config.epsilon,
                              stage_rng(seed, "noise"))
        mean_time = (time.perf_counter() - started) / noisy.shape[0]
        _save_examples(out, "noise", bundle.query_images, noisy, targets)
        update_timings(out, generation_noise_seconds=mean_time)
        return {"count": int(noisy.shape[0]),
                "mean_generation_seconds": mean_time}
    model = _load_hash(config, out)
    matrix = _load_codes(out)
    budget = config.budget()
    if method == "p2p":
        examples = p2p_attack(model, bundle.query_images, targets,
                              bundle.database_labels, matrix, budget,
                              stage_rng(seed, "p2p"))
    elif method == "dhta":
        examples = anchor_attack(model, bundle.query_images, targets,
                                 bundle.database_labels, matrix, budget,
                                 stage_rng(seed, "dhta"),
                                 set_size=config.anchor_set_size)
    else:
        raise InputError(f"unknown baseline {method!r}")
    _save_examples(out, method, bundle.query_images,
                   [example.perturbed for example in examples], targets)
    mean_time = float(np.mean([example.generation_time for example in examples]))
    update_timings(out, **{f"generation_{method}_seconds": mean_time})
    return {"count": len(examples), "mean_generation_seconds": mean_time}


def _method_row(report):
    return {
        "t_map": report.t_map,
        "map": report.map,
        "perceptibility": report.perceptibility,
        "queries_without_relevant": report.queries_without_relevant,
    }


def stage_eval(config, seed, out):
    """Score every available query set and write the run report."""
    config.validate()
    out = Path(out)
    bundle = _load_data(out)
    model = _load_hash(config, out)
    matrix = _load_codes(out)
    db_labels = bundle.database_labels
    targets = eval_target_labels(config, seed, bundle)

    methods = {}
    curves = {}

    original_codes = model.codes(bundle.query_images)
    curves["retrieval"] = evaluate_queries(original_codes, bundle.query_labels,
                                           matrix, db_labels)
    methods["Original"] = evaluate_queries(original_codes, targets, matrix,
                                           db_labels,
                                           true_labels=bundle.query_labels)
    curves["original"] = methods["Original"]

    for name, slug in (("Noise", "noise"), ("P2P", "p2p"), ("DHTA", "dhta"),
                       ("ProS-GAN", "prosgan")):
        path = out / f"adversarial_{slug}.npz"
        if not path.is_file():
            continue
        originals, perturbed, stored_targets = _load_examples(out, slug)
        codes = model.codes(perturbed)
        methods[name] = evaluate_queries(codes, stored_targets, matrix,
                                         db_labels,
                                         true_labels=bundle.query_labels,
                                         originals=originals,
                                         perturbed=perturbed)
        curves[slug] = methods[name]

    # upper references: rank by the chosen target codes themselves
    anchor_rng = stage_rng(seed, "anchor")
    anchor_codes = np.stack([
        anchor_code_for_label(target, db_labels, matrix, anchor_rng,
                              config.anchor_set_size)
        for target in targets
    ])
    methods["Anchor-code"] = evaluate_queries(anchor_codes, targets, matrix,
                                              db_labels)
    curves["anchor"] = methods["Anchor-code"]

    stack_path = out / "attack_stack.json"
    if stack_path.is_file():
        stack, _ = load_attack_stack(stack_path, config_hash=config.config_hash())
        proto_codes = np.stack([stack.prototype.prototype_code(target)
                                for target in targets])
        methods["Prototype-code"] = evaluate_queries(proto_codes, targets,
                                                     matrix, db_labels)
        curves["prototype"] = methods["Prototype-code"]

    report = {
        "seed": int(seed),
        "config_hash": config.config_hash(),
        "retrieval_map": curves["retrieval"].t_map,
        "methods": {name: _method_row(row) for name, row in methods.items()},
    }
    _write_json(out / "report.json", report)
    for slug, row in curves.items():
        _write_csv(out / f"pr_curve_{slug}.csv", "cutoff,precision,recall",
                   row.pr_curve)
        _write_csv(out / f"topn_{slug}.csv", "N,precision", row.precision_at_n)
    return report


def stage_transfer_eval(config, seed, out):
    """Train a second model and score the generator's output against it."""
    config.validate()
    out = Path(out)
    bundle = _load_data(out)
    originals, perturbed, stored_targets = _load_examples(out, "prosgan")
    model_b, losses = train_target_model(bundle.train_images,
                                         bundle.train_labels,
                                         config.transfer_hash_config(),
                                         stage_rng(seed, "transfer"))
    save_hash_model(out / "transfer_model.json", model_b, seed=seed,
                    config_hash=config.config_hash(),
                    meta={"final_loss": losses[-1]})
    matrix_b = encode_database(model_b, bundle.database_images)
    original_t = t_map(model_b.codes(originals), stored_targets, matrix_b,
                       bundle.database_labels)
    adversarial_t = t_map(model_b.codes(perturbed), stored_targets, matrix_b,
                          bundle.database_labels)
    report = {
        "seed": int(seed),
        "config_hash": config.config_hash(),
        "original_t_map": original_t,
        "adversarial_t_map": adversarial_t,
        "transfer_gain": adversarial_t - original_t,
    }
    _write_json(out / "transfer_report.json", report)
    return report


_STAGE_TABLE = {
    "gen_data": stage_gen_data,
    "train_hash": stage_train_hash,
    "encode_db": stage_encode_db,
    "train_attack": stage_train_attack,
    "attack": stage_attack,
    "p2p": lambda config, seed, out: stage_baseline(config, seed, out, "p2p"),
    "dhta": lambda config, seed, out: stage_baseline(config, seed, out, "dhta"),
    "noise": lambda config, seed, out: stage_baseline(config, seed, out, "noise"),
    "eval": stage_eval,
    "transfer_eval": stage_transfer_eval,
}

STAGE_ORDER = ("gen_data", "train_hash", "encode_db", "train_attack", "attack",
               "p2p", "dhta", "noise", "eval", "transfer_eval")


def execute_stage(name, config, seed, out):
    """Run one named stage, leaving a ``<stage>.partial`` marker on failure."""
    if name not in _STAGE_TABLE:
        raise InputError(f"unknown stage {name!r}")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    marker = out / f"{name}.partial"
    started = time.perf_counter()
    try:
        result = _STAGE_TABLE[name](config, seed, out)
    except BaseException as err:
        marker.write_text(f"{type(err).__name__}: {err}\n")
        raise
    marker.unlink(missing_ok=True)
    update_timings(out, **{f"{name}_seconds": time.perf_counter() - started})
    return result


def run_experiment(config, seed, out):
    """All stages in order; returns the evaluation and transfer reports."""
    results = {}
    for name in STAGE_ORDER:
        results[name] = execute_stage(name, config, seed, out)
    return {"report": results["eval"], "transfer": results["transfer_eval"]}
