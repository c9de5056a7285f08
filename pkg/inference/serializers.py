import math

from rest_framework import serializers


class CoefficientSerializer(serializers.Serializer):
    coefficient = serializers.CharField()
    estimate = serializers.FloatField(allow_null=True)
    se = serializers.FloatField(allow_null=True)
    ci_lo = serializers.FloatField(allow_null=True)
    ci_hi = serializers.FloatField(allow_null=True)
    autocorr1 = serializers.FloatField(allow_null=True)
    method = serializers.CharField(allow_blank=True)


class InferenceReportSerializer(serializers.Serializer):
    """InferenceReport 의 JSON 표현 (report.json)."""

    method = serializers.CharField(allow_blank=True)
    alpha = serializers.FloatField()
    B = serializers.IntegerField()
    phi_gamma = serializers.FloatField(allow_null=True)
    adjustment = serializers.FloatField(allow_null=True)
    coefficients = serializers.SerializerMethodField()
    config = serializers.DictField()

    def get_coefficients(self, obj):
        return CoefficientSerializer(obj.rows(), many=True).data


def finite_or_none(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value
