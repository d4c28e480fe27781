from rest_framework import serializers

from .models import FittedEnsemble


class FittedEnsembleSerializer(serializers.ModelSerializer):
    learners = serializers.SerializerMethodField()
    alpha_star = serializers.SerializerMethodField()

    class Meta:
        model = FittedEnsemble
        fields = ('id', 'name', 'mode', 't_star', 'grid', 'cause', 'learners', 'alpha_star', 'created_at')
        read_only_fields = fields

    def get_learners(self, obj):
        return [learner['name'] for learner in obj.payload.get('learners', [])]

    def get_alpha_star(self, obj):
        return obj.payload.get('alpha_star', [])


class FittedEnsembleDetailSerializer(FittedEnsembleSerializer):
    cv_report = serializers.SerializerMethodField()

    class Meta(FittedEnsembleSerializer.Meta):
        fields = FittedEnsembleSerializer.Meta.fields + ('cv_report',)
        read_only_fields = fields

    def get_cv_report(self, obj):
        return obj.payload.get('cv_report', {})


class ScoreRequestSerializer(serializers.Serializer):
    covariates = serializers.ListField(
        child=serializers.ListField(child=serializers.FloatField(), allow_empty=False),
        allow_empty=False,
    )

    def validate_covariates(self, value):
        widths = {len(row) for row in value}
        if len(widths) != 1:
            raise serializers.ValidationError("Every covariate row must have the same length")
        return value
