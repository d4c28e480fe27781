from rest_framework import serializers

from .catalogue import CATALOGUE


class LearnerConfigSerializer(serializers.Serializer):
    name = serializers.CharField()
    hyperparameters = serializers.DictField(required=False, default=dict)
    screening = serializers.FloatField(required=False, allow_null=True, min_value=0.0, max_value=1.0)

    def validate_name(self, value):
        if value not in CATALOGUE:
            raise serializers.ValidationError(
                f"Unknown learner '{value}'. Available: {', '.join(sorted(CATALOGUE))}"
            )
        return value

    def validate(self, attrs):
        spec = CATALOGUE[attrs['name']]
        unknown = set(attrs.get('hyperparameters', {})) - set(spec.defaults)
        if unknown:
            raise serializers.ValidationError({
                'hyperparameters': f"Not accepted by {attrs['name']}: {', '.join(sorted(unknown))}"
            })
        mode = self.context.get('mode')
        if mode and not spec.supports(mode):
            raise serializers.ValidationError({'name': f"{attrs['name']} ({spec.kind}) is not usable in {mode} mode"})
        return attrs


class LibraryConfigSerializer(serializers.Serializer):
    learners = LearnerConfigSerializer(many=True, allow_empty=False)

    def validate_learners(self, value):
        names = [item['name'] for item in value]
        duplicates = sorted({name for name in names if names.count(name) > 1})
        if duplicates:
            raise serializers.ValidationError(f"Learner names must be unique: {', '.join(duplicates)}")
        return value
