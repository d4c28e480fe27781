import logging

from rest_framework import status, viewsets
from rest_framework.decorators import action
from rest_framework.permissions import IsAuthenticated, IsAuthenticatedOrReadOnly
from rest_framework.response import Response

from .exceptions import EnsembleError
from .models import FittedEnsemble
from .serializers import FittedEnsembleDetailSerializer, FittedEnsembleSerializer, ScoreRequestSerializer
from .services import predict_ensemble

logger = logging.getLogger(__name__)


class FittedEnsembleViewSet(viewsets.ReadOnlyModelViewSet):
    """
    Fitted ensembles recorded by `manage.py fit --record`.
    - Anyone can list and retrieve
    - Scoring new covariate rows requires a JWT
    """
    queryset = FittedEnsemble.objects.all()
    serializer_class = FittedEnsembleSerializer
    permission_classes = [IsAuthenticatedOrReadOnly]

    def get_queryset(self):
        queryset = FittedEnsemble.objects.all()
        mode = self.request.query_params.get('mode')
        if mode:
            queryset = queryset.filter(mode=mode)
        return queryset

    def get_serializer_class(self):
        if self.action == 'retrieve':
            return FittedEnsembleDetailSerializer
        return FittedEnsembleSerializer

    @action(detail=True, methods=['post'], permission_classes=[IsAuthenticated])
    def score(self, request, pk=None):
        record = self.get_object()
        serializer = ScoreRequestSerializer(data=request.data)
        serializer.is_valid(raise_exception=True)
        try:
            model = record.as_ensemble()
            predictions = predict_ensemble(model, serializer.validated_data['covariates'])
        except (EnsembleError, ValueError) as exc:
            logger.warning("Scoring ensemble %s failed: %s", record.pk, exc)
            return Response({'error': str(exc)}, status=status.HTTP_400_BAD_REQUEST)
        return Response({
            'ensemble': record.pk,
            'mode': model.mode,
            't_star': model.t_star,
            'predictions': [float(p) for p in predictions],
        })
