# Message templates and the error hierarchy used across the package.

unlabeled_only = """
Warning: corpus contains no labeled reports.
Fine-tuning and evaluation need reports with a priority label (P1..P5).
"""

absent_class = "Warning: priority %s never occurs in the training set"

argmax_ties = "Warning: %d predictions had tied top probabilities, lowest class index kept"

skipped_augment = "Warning: %d reports too short for '%s' augmentation were skipped"

ablation_reversal = """
Warning: contrastive pre-training did not help on this run
(median weighted F1 with CL %.4f < without CL %.4f).
Desk-scale runs are noisy; this is reported, not treated as a failure.
"""

maxlen_skipped = "Warning: max length %d exceeds the encoder position table (%d), cell skipped"

# error texts
bad_json = "malformed JSON record (%s)"
bad_field = "field '%s' %s"
bad_priority = "unknown priority label '%s' (expected one of P1..P5)"
duplicate_id = "duplicate report id '%s'"
bad_encoding = "not valid UTF-8 (%s)"
too_few_reports = "split needs at least 10 reports, got %d"
unreadable_file = "can not read %s (%s)"

vocab_too_small = "target vocabulary size %d must exceed %d (256 bytes + %d special tokens)"
empty_texts = "no texts given to learn a vocabulary from"
unknown_token = "unknown token id %d (vocabulary size %d)"
bad_vocab_file = "%s: not a vocabulary file (%s)"
frame_too_short = "max_len must be at least 3 (CLS, one token, EOS), got %d"

shape_mismatch = "%s: incompatible shapes %s and %s"
non_scalar_loss = "backward needs a scalar loss, got shape %s"
stale_gradient = "parameter '%s' still holds a gradient; reset gradients before another backward"
no_targets = "cross entropy: every target is the ignore marker, nothing to average"
zero_norm = "cosine similarity undefined for a zero-norm representation (row %d)"
all_pad = "mean pooling needs at least one non-pad position (row %d)"
bad_schedule = "warmup steps %d exceed total steps %d"
bad_step = "step %d outside [0, %d]"

bad_augment = "'%s' augmentation needs %s, got %d"
no_content = "sequence has no content tokens to mask"

bad_config_line = "%s:%d: expected key=value, got '%s'"
unknown_key = "unknown configuration key '%s'"
bad_value = "configuration key '%s': can not parse '%s' as %s"
invalid_config = "invalid configuration: %s"

bad_magic = "%s: not a checkpoint file"
bad_version = "%s: checkpoint version %d, this build reads version %d"
truncated = "%s: checkpoint truncated (%s)"
hash_mismatch = "checkpoint was trained with vocabulary %s..., supplied vocabulary is %s..."
tensor_shape = "checkpoint tensor '%s' has shape %s, config expects %s"
missing_tensor = "checkpoint lacks tensor '%s'"

wrong_stage = "%s needs a checkpoint tagged %s, got '%s'"
empty_train = "no labeled training reports"
empty_test = "no labeled test reports"


def formatProblem(lineNo, message):
    return "line %d: %s" % (lineNo, message) if lineNo else message


class BugPrioError(RuntimeError):
    pass


class CorpusError(BugPrioError):
    # problems are (lineNumber, message) pairs; line 0 means the file as a whole
    def __init__(self, problems):
        self.problems = [(int(n), message) for n, message in problems]
        super().__init__("\n".join(formatProblem(n, message) for n, message in self.problems))


class VocabError(BugPrioError):
    pass


class ShapeError(BugPrioError, ValueError):
    pass


class GraphError(BugPrioError):
    pass


class DegenerateInputError(BugPrioError, ValueError):
    pass


class ConfigError(BugPrioError):
    pass


class CheckpointError(BugPrioError):
    pass


class AugmentError(BugPrioError, ValueError):
    pass


class StageError(BugPrioError):
    pass
