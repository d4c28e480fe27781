import tempfile
from pathlib import Path

import numpy as np
from django.contrib.auth import get_user_model
from django.urls import reverse
from rest_framework import status
from rest_framework.test import APITestCase

from apps.ensemble.models import FittedEnsemble
from apps.ensemble.services import fit_superlearner_pseudo, predict_ensemble, save_ensemble
from apps.ensemble.tests.test_services import GRID, competing_dataset
from apps.learners.services import make_learner


class FittedEnsembleApiTests(APITestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.tmp = tempfile.TemporaryDirectory()
        dataset = competing_dataset(n=80, seed=11)
        cls.model = fit_superlearner_pseudo(
            dataset, GRID, 1.0, [make_learner('ridge'), make_learner('cart')], V=4, lam=100.0, seed=1
        )
        save_ensemble(cls.model, Path(cls.tmp.name) / 'model.json')
        cls.covariates = dataset.covariates[:5].tolist()

    @classmethod
    def tearDownClass(cls):
        cls.tmp.cleanup()
        super().tearDownClass()

    def setUp(self):
        self.record = FittedEnsemble.record('ridge+cart', self.model, Path(self.tmp.name) / 'model.joblib')
        self.user = get_user_model().objects.create_user(username='analyst', password='s3cret-pass')

    def authenticate(self):
        response = self.client.post(reverse('token_obtain_pair'),
                                    {'username': 'analyst', 'password': 's3cret-pass'}, format='json')
        self.assertEqual(response.status_code, status.HTTP_200_OK)
        self.client.credentials(HTTP_AUTHORIZATION=f"Bearer {response.data['access']}")

    def test_list_is_public(self):
        response = self.client.get(reverse('ensemble-list'))
        self.assertEqual(response.status_code, status.HTTP_200_OK)
        self.assertEqual(response.data['results'][0]['learners'], ['ridge', 'cart'])

    def test_retrieve_includes_cv_report(self):
        response = self.client.get(reverse('ensemble-detail', args=[self.record.pk]))
        self.assertEqual(response.data['cv_report']['objective'], 'pseudo_auc')

    def test_score_needs_token(self):
        response = self.client.post(reverse('ensemble-score', args=[self.record.pk]),
                                    {'covariates': self.covariates}, format='json')
        self.assertEqual(response.status_code, status.HTTP_401_UNAUTHORIZED)

    def test_score(self):
        self.authenticate()
        response = self.client.post(reverse('ensemble-score', args=[self.record.pk]),
                                    {'covariates': self.covariates}, format='json')
        self.assertEqual(response.status_code, status.HTTP_200_OK)
        expected = predict_ensemble(self.model, np.array(self.covariates))
        np.testing.assert_allclose(response.data['predictions'], expected, atol=1e-12)

    def test_score_rejects_ragged_rows(self):
        self.authenticate()
        response = self.client.post(reverse('ensemble-score', args=[self.record.pk]),
                                    {'covariates': [[0.1, 0.2, 0.3], [0.1]]}, format='json')
        self.assertEqual(response.status_code, status.HTTP_400_BAD_REQUEST)

    def test_score_rejects_wrong_width(self):
        self.authenticate()
        response = self.client.post(reverse('ensemble-score', args=[self.record.pk]),
                                    {'covariates': [[0.1, 0.2]]}, format='json')
        self.assertEqual(response.status_code, status.HTTP_400_BAD_REQUEST)
        self.assertIn('error', response.data)
