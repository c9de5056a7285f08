from django.conf import settings
from rest_framework import serializers

from baselines.mala import FIXED_EFFECT_PRIOR_VARIANCE
from engine.chains import Method
from estimators.dgp import DgpKind
from resampling.plans import Scheme

MODEL_CHOICES = ("ols", "probit", "nls-exp", "panel-variance")
COMPARE_METHODS = ("rnr", "rqn", "rgd", "boot", "dmk", "ks", "mala", "sgd", "sandwich", "split")
COMMAND_CHOICES = ("fit", "mc", "compare", "check", "saddle-demo")


def unflatten(flat):
    """{"qn.L": 25} -> {"qn": {"L": 25}}."""
    nested = {}
    for key, value in flat.items():
        head, *rest = key.split(".")
        if rest:
            nested.setdefault(head, {})
            if not isinstance(nested[head], dict):
                nested[head] = {}
            nested[head][".".join(rest)] = value
        else:
            nested[head] = value
    return {k: unflatten(v) if isinstance(v, dict) else v for k, v in nested.items()}


def flatten(nested, prefix=""):
    """unflatten 의 역변환 (설정 echo 용)."""
    flat = {}
    for key, value in nested.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(flatten(value, f"{name}."))
        else:
            flat[name] = value
    return flat


class QnSerializer(serializers.Serializer):
    L = serializers.IntegerField(min_value=1, allow_null=True, required=False, default=None)
    lambda_S = serializers.FloatField(min_value=0, required=False, default=1e-6)
    lambda_min = serializers.FloatField(min_value=0, required=False, default=1e-4)
    max_refresh = serializers.IntegerField(min_value=1, allow_null=True, required=False, default=None)
    init = serializers.ChoiceField(choices=("hessian", "identity"), required=False, default="hessian")

    def validate(self, attrs):
        if attrs["lambda_S"] <= 0 or attrs["lambda_min"] <= 0:
            raise serializers.ValidationError("qn.lambda_S 와 qn.lambda_min 은 양수여야 합니다.")
        return attrs


class PenaltySerializer(serializers.Serializer):
    enabled = serializers.BooleanField(required=False, default=False)
    lambda0 = serializers.FloatField(min_value=0, required=False, default=20.0)
    decay = serializers.FloatField(min_value=0, max_value=1, required=False, default=0.9)
    duration = serializers.IntegerField(min_value=0, allow_null=True, required=False, default=None)

    def validate_decay(self, value):
        if value <= 0:
            raise serializers.ValidationError("penalty.decay 는 (0, 1] 범위여야 합니다.")
        return value


class McSerializer(serializers.Serializer):
    replications = serializers.IntegerField(min_value=1, required=False, default=200)
    workers = serializers.IntegerField(min_value=1, required=False, default=1)


class DgpSerializer(serializers.Serializer):
    kind = serializers.ChoiceField(choices=[k.value for k in DgpKind])
    n = serializers.IntegerField(min_value=1, required=False, default=200)
    T = serializers.IntegerField(min_value=2, required=False, default=None, allow_null=True)
    theta = serializers.ListField(child=serializers.FloatField(), min_length=1)
    n_groups = serializers.IntegerField(min_value=0, required=False, default=0)

    def validate(self, attrs):
        if attrs["kind"] == DgpKind.NONLINEAR_PANEL.value and attrs.get("T") is None:
            raise serializers.ValidationError("NonlinearPanel 은 dgp.T 가 필요합니다.")
        return attrs


class SaddleSerializer(serializers.Serializer):
    c_grid = serializers.ListField(
        child=serializers.FloatField(), required=False, default=[0.0, 0.1, 0.5, 1.0, 5.0]
    )
    H = serializers.ListField(
        child=serializers.ListField(child=serializers.FloatField()),
        required=False,
        allow_null=True,
        default=None,
    )
    noise = serializers.FloatField(min_value=0, required=False, default=10.0)
    iters = serializers.IntegerField(min_value=1, required=False, default=50)


class MalaSerializer(serializers.Serializer):
    target_accept = serializers.FloatField(required=False, default=0.57)
    tune = serializers.BooleanField(required=False, default=True)
    prior_variance = serializers.FloatField(
        min_value=0, required=False, default=FIXED_EFFECT_PRIOR_VARIANCE
    )

    def validate_target_accept(self, value):
        if not 0 < value < 1:
            raise serializers.ValidationError("mala.target_accept 는 (0, 1) 범위여야 합니다.")
        return value


class SgdSerializer(serializers.Serializer):
    gamma0 = serializers.FloatField(required=False, default=None, allow_null=True)
    delta = serializers.FloatField(required=False, default=0.625)
    m = serializers.IntegerField(min_value=1, required=False, default=1)

    def validate_delta(self, value):
        if not 0.5 < value <= 1:
            raise serializers.ValidationError("sgd.delta 는 (1/2, 1] 범위여야 합니다.")
        return value


class CliConfigSerializer(serializers.Serializer):
    """CLI 설정 (점 표기 키를 중첩 dict 로 펼친 뒤 검증).

    기본값 -> 설정 파일 -> 명령행 플래그 순으로 덮어쓴 값을 검증하고,
    검증된 값 (기본값 포함) 이 report.json 의 설정 echo 가 됩니다.
    """

    command = serializers.ChoiceField(choices=COMMAND_CHOICES, required=False, default="fit")
    model = serializers.ChoiceField(choices=MODEL_CHOICES, required=False, default="ols")
    data = serializers.CharField(required=False, allow_null=True, default=None)
    outcome = serializers.CharField(required=False, allow_null=True, default=None)
    regressors = serializers.ListField(child=serializers.CharField(), required=False, default=list)
    cluster = serializers.CharField(required=False, allow_null=True, default=None)
    unit = serializers.CharField(required=False, allow_null=True, default=None)
    time = serializers.CharField(required=False, allow_null=True, default=None)
    add_constant = serializers.BooleanField(required=False, default=False)
    dgp = DgpSerializer(required=False, allow_null=True, default=None)

    method = serializers.ChoiceField(choices=[m.value for m in Method], required=False, default="rqn")
    scheme = serializers.ChoiceField(choices=[s.value for s in Scheme], required=False, default="gaussian")
    cluster_aware = serializers.BooleanField(required=False, default=False)
    gamma = serializers.FloatField(min_value=0, max_value=1, required=False, default=0.1)
    alpha = serializers.FloatField(min_value=0, max_value=1, required=False, default=0.05)
    B = serializers.IntegerField(min_value=1, required=False, default=2000)
    burn = serializers.IntegerField(min_value=0, required=False, allow_null=True, default=None)
    m = serializers.IntegerField(min_value=1, required=False, allow_null=True, default=None)
    seed = serializers.IntegerField(min_value=0, max_value=2**64 - 1, required=False)
    theta0 = serializers.ListField(
        child=serializers.FloatField(), required=False, allow_null=True, default=None
    )
    modify = serializers.BooleanField(required=False, default=False)
    divergence_bound = serializers.FloatField(min_value=0, required=False, default=1e8)
    split_panel = serializers.BooleanField(required=False, default=False)
    half_delay = serializers.IntegerField(min_value=0, required=False, default=0)
    dmk_k = serializers.IntegerField(min_value=1, required=False, default=1)
    methods = serializers.ListField(
        child=serializers.ChoiceField(choices=COMPARE_METHODS), required=False, default=list
    )
    output_dir = serializers.CharField(required=False)

    qn = QnSerializer(required=False, default=dict)
    penalty = PenaltySerializer(required=False, default=dict)
    mc = McSerializer(required=False, default=dict)
    saddle = SaddleSerializer(required=False, default=dict)
    mala = MalaSerializer(required=False, default=dict)
    sgd = SgdSerializer(required=False, default=dict)

    def validate_gamma(self, value):
        if value <= 0:
            raise serializers.ValidationError("gamma 는 (0, 1] 범위여야 합니다.")
        return value

    def validate_alpha(self, value):
        if not 0 < value < 1:
            raise serializers.ValidationError("alpha 는 (0, 1) 범위여야 합니다.")
        return value

    def validate(self, attrs):
        attrs.setdefault("seed", settings.RESAMPLING_SEED)
        attrs.setdefault("output_dir", str(settings.RESAMPLING_OUTPUT_DIR))
        for name, child in (
            ("qn", QnSerializer),
            ("penalty", PenaltySerializer),
            ("mc", McSerializer),
            ("saddle", SaddleSerializer),
            ("mala", MalaSerializer),
            ("sgd", SgdSerializer),
        ):
            # default=dict 인 중첩 필드는 검증을 거치지 않으므로 기본값을 채움
            if not attrs.get(name):
                nested = child(data={})
                nested.is_valid(raise_exception=True)
                attrs[name] = dict(nested.validated_data)
            else:
                attrs[name] = dict(attrs[name])
        if attrs.get("dgp") is not None:
            attrs["dgp"] = dict(attrs["dgp"])
        if attrs["data"] and not attrs["outcome"] and attrs["data"] != "mroz":
            raise serializers.ValidationError({"outcome": "data 를 지정하면 outcome 열이 필요합니다."})
        if attrs["scheme"] != Scheme.M_OUT_OF_N.value and attrs["m"] is not None:
            raise serializers.ValidationError({"m": "m 은 m-out-of-n 방식에서만 사용합니다."})
        return attrs
