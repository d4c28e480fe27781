from rest_framework import serializers

from .services import QUANTILE_CONVENTIONS, SCENARIOS, STANDARD


class ScenarioConfigSerializer(serializers.Serializer):
    scenario = serializers.CharField()
    n = serializers.IntegerField(min_value=1, default=500)
    censoring_target = serializers.FloatField(default=0.2)
    t_star = serializers.FloatField(default=26.5)
    gamma2 = serializers.FloatField(default=3.5)
    kappa2 = serializers.FloatField(default=2.5)
    seed = serializers.IntegerField(min_value=0, default=2018)
    quantile_convention = serializers.ChoiceField(choices=QUANTILE_CONVENTIONS, default=STANDARD)
    rescale_censoring = serializers.BooleanField(default=False)
    calibrate_incidence = serializers.BooleanField(default=True)

    def validate_scenario(self, value):
        value = value.strip().upper()
        if value == '0':
            value = 'S0'
        if value not in SCENARIOS:
            raise serializers.ValidationError(f"Unknown scenario; expected one of {', '.join(SCENARIOS)}")
        return value

    def validate_censoring_target(self, value):
        if not 0 < value < 1:
            raise serializers.ValidationError("Censoring target must lie strictly between 0 and 1")
        return value

    def validate(self, data):
        for field in ('t_star', 'gamma2', 'kappa2'):
            if data[field] <= 0:
                raise serializers.ValidationError({field: "Must be positive"})
        return data
