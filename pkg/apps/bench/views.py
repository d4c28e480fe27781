from rest_framework import viewsets
from rest_framework.decorators import action
from rest_framework.permissions import AllowAny
from rest_framework.response import Response

from .models import BenchRun
from .serializers import BenchRunDetailSerializer, BenchRunSerializer
from .services import render_markdown


class BenchRunViewSet(viewsets.ReadOnlyModelViewSet):
    """
    Recorded bench runs (`manage.py bench --record`).
    - Filter by scenario with ?scenario=A
    - /markdown/ renders the comparison table
    """
    queryset = BenchRun.objects.all()
    permission_classes = [AllowAny]

    def get_queryset(self):
        queryset = BenchRun.objects.all()
        scenario = self.request.query_params.get('scenario')
        if scenario:
            queryset = queryset.filter(scenario=scenario.upper())
        return queryset

    def get_serializer_class(self):
        if self.action == 'retrieve':
            return BenchRunDetailSerializer
        return BenchRunSerializer

    @action(detail=True, methods=['get'])
    def markdown(self, request, pk=None):
        run = self.get_object()
        return Response({'markdown': render_markdown(run.as_report())})
