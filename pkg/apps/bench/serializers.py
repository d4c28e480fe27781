from rest_framework import serializers

from .models import BenchRun


class BenchRunSerializer(serializers.ModelSerializer):
    summary = serializers.SerializerMethodField()

    class Meta:
        model = BenchRun
        fields = ('id', 'scenario', 'censoring_target', 'replicates', 'completed', 'seed', 'methods', 'summary',
                  'created_at')
        read_only_fields = fields

    def get_summary(self, obj):
        return obj.report.get('methods', [])


class BenchRunDetailSerializer(BenchRunSerializer):
    class Meta(BenchRunSerializer.Meta):
        fields = BenchRunSerializer.Meta.fields + ('report',)
        read_only_fields = fields
